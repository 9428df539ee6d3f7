#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "drbl/classifier.hpp"
#include "drbl/sentence_pair.hpp"

namespace drbl {

struct AdamConfig {
  double learning_rate = 0.0004;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moments per parameter, in `ModelParams::parameters()` order.
template <typename T>
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::string> names;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;

  static AdamState init(std::span<const Parameter<T>> params, AdamConfig config = {});
};

/// One bias-corrected Adam update from the gradients stored on each
/// parameter. Frozen rows are left untouched. A parameter without a gradient
/// buffer is treated as having zero gradient.
template <typename T>
void adam_step(std::span<const Parameter<T>> params, AdamState<T>& state);

/// Scales all gradients so that their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename T>
double clip_gradients(std::span<const Parameter<T>> params, double max_norm);

struct Example {
  std::string id;
  PairInput input;
  Label gold = Label::entailment;
};

std::vector<Example> make_examples(std::span<const SentencePair> pairs, const Vocabulary& vocab);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_accuracy = 0.0;
  double dev_accuracy = 0.0;
  double mean_loss = 0.0;
};

struct TrainOptions {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;  // 0 disables early stopping
  double clip_norm = 0.0;    // 0 disables clipping
  std::size_t threads = 1;
  std::uint64_t seed = 1;
  AdamConfig adam;
  /// Measure training accuracy with a separate dropout-free pass instead of
  /// the running accuracy of the training forward passes.
  bool clean_train_accuracy = false;
  /// Stop once the (clean or running) training accuracy reaches this value.
  double stop_at_train_accuracy = 2.0;
  std::function<void(const EpochRecord&)> on_epoch;
};

template <typename T>
struct TrainResult {
  ModelParams<T> best;
  ModelParams<T> last;
  AdamState<T> adam;
  std::vector<EpochRecord> history;
  double best_dev_accuracy = -1.0;
  std::size_t best_epoch = 0;
};

/// Mean negative log-likelihood of one batch; gradients are accumulated on
/// the parameters (averaged over the batch). Per-example work runs on up to
/// `threads` threads; accumulation happens in example order.
template <typename T>
double batch_gradients(const ModelParams<T>& params, std::span<const Example> batch,
                       std::span<const std::uint64_t> dropout_seeds, std::size_t threads,
                       std::size_t* correct = nullptr);

template <typename T>
TrainResult<T> train(ModelParams<T> params, std::span<const Example> train_set,
                     std::span<const Example> dev_set, const TrainOptions& options = {});

struct Evaluation {
  double accuracy = 0.0;
  std::vector<Prediction> predictions;  // input order
};

template <typename T>
Evaluation evaluate(const ModelParams<T>& params, std::span<const Example> examples,
                    std::size_t threads = 1);

/// Fraction of matching labels. Sizes must agree.
double accuracy(std::span<const Label> predicted, std::span<const Label> gold);

void write_history(const std::filesystem::path& path, std::span<const EpochRecord> history);
std::vector<EpochRecord> read_history(const std::filesystem::path& path);

}  // namespace drbl
