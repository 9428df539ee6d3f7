#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "drbl/sentence_pair.hpp"
#include "drbl/tensor.hpp"

namespace drbl {

/// Token <-> index bijection with training-corpus frequencies. The markers and
/// UNK are always present.
class Vocabulary {
 public:
  Vocabulary();

  /// Indexes every token of the training pairs in first-seen order, then
  /// appends _FOL_, _EOL_ and UNK.
  static Vocabulary build(std::span<const SentencePair> training_pairs);
  static Vocabulary from_tokens(std::span<const std::string> tokens,
                                std::span<const std::uint64_t> counts = {});

  std::size_t size() const noexcept { return tokens_.size(); }
  bool contains(std::string_view token) const;
  std::optional<std::size_t> find(std::string_view token) const;
  std::size_t index_or_unknown(std::string_view token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  std::uint64_t count(std::size_t index) const { return counts_.at(index); }
  std::span<const std::string> tokens() const { return tokens_; }
  std::span<const std::uint64_t> counts() const { return counts_; }

  std::size_t first_marker() const { return first_marker_; }
  std::size_t last_marker() const { return last_marker_; }
  std::size_t unknown() const { return unknown_; }

  std::vector<std::size_t> encode(std::span<const std::string> tokens) const;

  /// One token per line in index order.
  void save(const std::filesystem::path& path) const;
  /// `token<TAB>count` per line in index order.
  void save_counts(const std::filesystem::path& path) const;
  /// Reads a token dump; picks up `<path>.counts` frequencies when present.
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::size_t add(const std::string& token, std::uint64_t count);
  void ensure_specials();

  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t first_marker_ = 0;
  std::size_t last_marker_ = 0;
  std::size_t unknown_ = 0;
};

inline Vocabulary build_vocabulary(std::span<const SentencePair> training_pairs) {
  return Vocabulary::build(training_pairs);
}

/// Trainable |V|×r word-vector matrix. The UNK row is frozen.
template <typename T>
struct EmbeddingTable {
  Tensor<T> matrix;
  bool trainable = true;
  std::vector<std::size_t> frozen_rows;

  /// Every row drawn from N(0, 0.01²).
  static EmbeddingTable random(const Vocabulary& vocab, std::size_t dim, std::mt19937_64& rng,
                               bool trainable = true);

  std::size_t dim() const { return matrix.cols(); }

  /// Row gather on the tape; gradients accumulate into the table when trainable.
  Tensor<T> embed(Tape<T>& tape, std::span<const std::size_t> indices) const;
};

struct PretrainedReport {
  std::size_t lines = 0;
  std::size_t covered = 0;
  std::size_t vocabulary = 0;
  bool empty_coverage() const { return covered == 0; }
};

/// Loads `token f1 ... fr` lines. Covered rows are copied; the rest are drawn
/// from N(0, 0.01²). UNK becomes the mean of the copied rows.
template <typename T>
EmbeddingTable<T> load_pretrained(const std::filesystem::path& path, const Vocabulary& vocab,
                                  std::size_t dim, std::mt19937_64& rng,
                                  PretrainedReport* report = nullptr);

}  // namespace drbl
