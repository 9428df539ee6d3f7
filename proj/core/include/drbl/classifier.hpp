#pragma once

#include <array>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "drbl/attention.hpp"
#include "drbl/embeddings.hpp"
#include "drbl/encoder.hpp"
#include "drbl/labels.hpp"
#include "drbl/model_config.hpp"
#include "drbl/tensor.hpp"

namespace drbl {

/// Classifier head. Without the hidden layer only the output pair is defined.
template <typename T>
struct MlpParams {
  Tensor<T> hidden_weights;  // in × d_h
  Tensor<T> hidden_bias;     // 1 × d_h
  Tensor<T> output_weights;  // d_h × 3 (in × 3 without the hidden layer)
  Tensor<T> output_bias;     // 1 × 3

  bool has_hidden() const { return hidden_weights.defined(); }
};

template <typename T>
struct ModelParams {
  ModelConfig config;
  EmbeddingTable<T> embeddings;
  LstmParams<T> encoder;
  ProjectionParams<T> projection;
  LstmParams<T> inference;
  MlpParams<T> mlp;

  /// Initializes every weight from `config.seed`. A supplied embedding table
  /// (e.g. pretrained) is used as is.
  static ModelParams init(const ModelConfig& config, std::size_t vocabulary_size,
                          std::optional<EmbeddingTable<T>> embeddings = std::nullopt,
                          std::size_t unknown_index = 0);
  static ModelParams init(const ModelConfig& config, const Vocabulary& vocab,
                          std::optional<EmbeddingTable<T>> embeddings = std::nullopt);

  /// Trainable tensors. Stable order, stable names.
  std::vector<Parameter<T>> parameters() const;
  /// Every tensor, including a frozen embedding table.
  std::vector<Parameter<T>> tensors() const;
  /// Deep copy.
  ModelParams clone() const;
  std::size_t parameter_count() const;
};

/// Number of trainable scalars implied by a configuration.
std::size_t parameter_count(const ModelConfig& config, std::size_t vocabulary_size);

/// Token indices of one pair. Positions at or past the lengths are padding.
struct PairInput {
  std::vector<std::size_t> premise;
  std::vector<std::size_t> hypothesis;
  std::size_t premise_length = kFullLength;
  std::size_t hypothesis_length = kFullLength;

  static PairInput from(const SentencePair& pair, const Vocabulary& vocab);
  /// Appends `extra` padding positions (filled with `pad_index`) to each side.
  PairInput padded(std::size_t extra_premise, std::size_t extra_hypothesis,
                   std::size_t pad_index) const;
};

struct Prediction {
  std::array<double, kNumLabels> probs{};
  Label label = Label::entailment;

  static Prediction from_probs(std::span<const double> probs);
};

template <typename T>
struct ForwardResult {
  Tensor<T> probs;   // 1 × 3
  Tensor<T> energy;  // n × m, padding included
  AlignmentOutput<T> alignment;
  Prediction prediction;
};

/// softmax(tanh([U,V]·W_h + b_h)·W_o + b_o), with dropout on [U,V] and on the
/// hidden activation when training.
template <typename T>
Tensor<T> mlp(Tape<T>& tape, const Tensor<T>& premise_pooled, const Tensor<T>& hypothesis_pooled,
              const MlpParams<T>& params, double dropout_rate = 0.0, std::mt19937_64* rng = nullptr,
              bool training = false);

/// Embedding, encoding, attention, inference, pooling and classification for
/// one pair. `rng` drives dropout and is only required when training.
template <typename T>
ForwardResult<T> forward(Tape<T>& tape, const ModelParams<T>& params, const PairInput& pair,
                         bool training = false, std::mt19937_64* rng = nullptr);

/// -log p[gold], with p[gold] clamped at 1e-12.
template <typename T>
Tensor<T> loss(Tape<T>& tape, const Tensor<T>& probs, Label gold);

}  // namespace drbl
