#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drbl/labels.hpp"

namespace drbl {

using Distribution = std::array<double, kNumLabels>;

/// Per-pair class distributions of one member on one split.
struct MemberOutput {
  std::string id;
  std::vector<std::string> pair_ids;
  std::vector<Distribution> probs;

  std::size_t size() const { return probs.size(); }
};

enum class EnsembleStrategy { weighted_average, average, majority_vote };

/// Σ_k w_k · probs_k per pair. Weights must be non-negative and sum to 1.
std::vector<Distribution> weighted_average(std::span<const MemberOutput> members,
                                           std::span<const double> weights);
/// Unweighted mean of the member distributions.
std::vector<Distribution> average(std::span<const MemberOutput> members);

/// Most frequent label per pair; ties go to the tied label with the highest
/// mean probability, then to the lowest label index.
std::vector<Label> majority_vote(std::span<const MemberOutput> members);

/// Argmax per distribution, lowest index on ties.
std::vector<Label> argmax_labels(std::span<const Distribution> probs);
double accuracy_of(std::span<const Distribution> probs, std::span<const Label> gold);

/// Throws DataError unless every member covers the same pair ids in the same
/// order (and, if given, the gold count matches).
void check_coverage(std::span<const MemberOutput> members, std::size_t gold_count = 0);

struct WeightSearch {
  std::vector<double> weights;
  double accuracy = 0.0;
};

/// Coordinate ascent over the simplex discretized at `step`: starting from the
/// best one-hot vertex (or `warm_start` if it is at least as good), repeatedly
/// moves weight mass between two members while dev accuracy improves, or
/// stays equal and the weights become more uniform (smaller L2 norm).
WeightSearch learn_weights(std::span<const MemberOutput> members, std::span<const Label> gold,
                           double step = 0.05, std::span<const double> warm_start = {});

/// Weights proportional to each member's accuracy.
std::vector<double> accuracy_weights(std::span<const MemberOutput> members,
                                     std::span<const Label> gold);

struct SelectionStep {
  std::size_t size = 0;
  std::vector<std::size_t> members;  // indices into the candidate pool
  std::vector<double> weights;
  double dev_accuracy = 0.0;
  std::optional<double> test_accuracy;
};

struct Selection {
  std::vector<SelectionStep> steps;  // steps[n - 1] is the best n-member ensemble found
  std::size_t best_size = 0;         // argmax dev accuracy, smallest n on ties
};

/// Greedy growth: extends the best (n-1)-member set by each remaining
/// candidate and re-learns the weights starting from the previous optimum.
Selection greedy_select(std::span<const MemberOutput> dev, std::span<const Label> dev_gold,
                        std::size_t max_size, std::span<const MemberOutput> test = {},
                        std::span<const Label> test_gold = {}, double step = 0.05);

/// CSV with header `pair_id,p_entailment,p_neutral,p_contradiction`.
void write_predictions(const std::filesystem::path& path, std::span<const std::string> pair_ids,
                       std::span<const Distribution> probs);
MemberOutput read_predictions(const std::filesystem::path& path);

}  // namespace drbl
