#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "drbl/labels.hpp"
#include "drbl/sentence_pair.hpp"

namespace drbl {

enum class Tag {
  entailment,
  neutral,
  contradiction,
  high_overlap,
  regular_overlap,
  low_overlap,
  long_sentence,
  regular_sentence,
  short_sentence,
  negation,
  quantifier,
  belief,
};

inline constexpr std::size_t kNumTags = 12;
std::span<const Tag> all_tags();
std::string_view tag_name(Tag tag);

struct TagSet {
  bool high_overlap = false;
  bool regular_overlap = false;
  bool low_overlap = false;
  bool long_sentence = false;
  bool regular_sentence = false;
  bool short_sentence = false;
  bool negation = false;
  bool quantifier = false;
  bool belief = false;
  Label gold = Label::entailment;
  double overlap = 0.0;

  bool has(Tag tag) const;
};

std::span<const std::string_view> quantifier_words();
std::span<const std::string_view> belief_words();
std::span<const std::string_view> negation_words();

/// Lowercased tokens without sentence markers and punctuation.
std::vector<std::string> content_tokens(std::span<const std::string> tokens);

/// Shared unique content tokens over unique hypothesis content tokens.
double overlap_ratio(const SentencePair& pair);

TagSet annotate(const SentencePair& pair);

struct CategoryRow {
  Tag tag = Tag::entailment;
  std::size_t count = 0;
  double frequency = 0.0;                      // percent of all pairs
  std::vector<std::optional<double>> accuracy;  // percent per model; empty category -> nullopt
};

struct CategoricalReport {
  std::size_t total = 0;
  std::vector<std::string> models;
  std::vector<CategoryRow> rows;  // all_tags() order
};

CategoricalReport categorical_accuracy(std::span<const std::vector<Label>> predictions,
                                       std::span<const std::string> model_names,
                                       std::span<const Label> gold, std::span<const TagSet> tags);

/// `tag<TAB>frequency<TAB>accuracy...`, "-" for empty categories.
void write_report(std::ostream& out, const CategoricalReport& report);

struct ChiSquareResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool low_expected_count = false;  // some expected cell < 5
  std::array<std::array<double, 2>, 2> table{};
};

/// Pearson statistic (one degree of freedom, no continuity correction).
ChiSquareResult chi_square_table(const std::array<std::array<double, 2>, 2>& table);

/// Rows: system A, system B. Columns: correct, incorrect.
ChiSquareResult chi_square(std::span<const Label> outputs_a, std::span<const Label> outputs_b,
                           std::span<const Label> gold);

/// Upper tail of the chi-square distribution.
double chi_square_p_value(double statistic, double degrees_of_freedom = 1.0);

struct Heatmap {
  std::vector<std::string> premise;
  std::vector<std::string> hypothesis;
  std::vector<std::vector<double>> weights;  // premise rows × hypothesis columns
};

/// Row-softmax of the energy matrix.
Heatmap heatmap_from_energy(const std::vector<std::vector<double>>& energy,
                            std::span<const std::string> premise,
                            std::span<const std::string> hypothesis);

void write_heatmap_csv(const std::filesystem::path& path, const Heatmap& heatmap);
Heatmap read_heatmap_csv(const std::filesystem::path& path);
/// Grayscale grid, darker cells for larger weights.
void write_heatmap_svg(const std::filesystem::path& path, const Heatmap& heatmap);

/// Writes `<base>.csv` and `<base>.svg`; returns the heatmap.
Heatmap export_heatmap(const std::vector<std::vector<double>>& energy,
                       std::span<const std::string> premise, std::span<const std::string> hypothesis,
                       const std::filesystem::path& base);

}  // namespace drbl
