#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "drbl/tensor.hpp"

namespace drbl {

enum class Activation { relu, tanh };

/// Which comparison blocks join [x̂, x̃] in the enriched vector.
struct EnrichmentTerms {
  bool difference = true;
  bool product = true;

  /// Enriched width in units of the encoder hidden width 2d.
  std::size_t blocks() const { return 2 + (difference ? 1 : 0) + (product ? 1 : 0); }
};

/// One projector shared by premise and hypothesis.
template <typename T>
struct ProjectionParams {
  Tensor<T> weights;  // (blocks·2d) × d
  Tensor<T> bias;     // 1 × d
  Activation activation = Activation::relu;

  static ProjectionParams init(std::size_t input_dim, std::size_t output_dim, Activation activation,
                               std::mt19937_64& rng);
  std::vector<Parameter<T>> parameters(const std::string& prefix) const;
};

template <typename T>
struct AlignmentOutput {
  Tensor<T> premise_weights;     // n × m, rows sum to 1 over real hypothesis tokens
  Tensor<T> hypothesis_weights;  // m × n, rows sum to 1 over real premise tokens
  Tensor<T> premise_attended;    // ũ, n × 2d
  Tensor<T> hypothesis_attended; // ṽ, m × 2d
};

/// E = û · v̂ᵀ
template <typename T>
Tensor<T> energy(Tape<T>& tape, const Tensor<T>& premise, const Tensor<T>& hypothesis);

/// Soft alignment in both directions. Token masks (1 = real token) may be
/// empty, meaning every position is real. Rows at padded positions are zero.
template <typename T>
AlignmentOutput<T> align(Tape<T>& tape, const Tensor<T>& energy, const Tensor<T>& premise,
                         const Tensor<T>& hypothesis, std::span<const std::uint8_t> premise_mask = {},
                         std::span<const std::uint8_t> hypothesis_mask = {});

/// Row-wise [x̂, x̃, x̂ − x̃, x̂ ⊙ x̃] (subject to `terms`), dropout when
/// training, then activation(a·W + b).
template <typename T>
Tensor<T> enrich_project(Tape<T>& tape, const Tensor<T>& encoded, const Tensor<T>& attended,
                         const ProjectionParams<T>& params, EnrichmentTerms terms = {},
                         double dropout_rate = 0.0, std::mt19937_64* rng = nullptr,
                         bool training = false);

/// The enriched rows alone, before dropout and projection.
template <typename T>
Tensor<T> enrich(Tape<T>& tape, const Tensor<T>& encoded, const Tensor<T>& attended,
                 EnrichmentTerms terms = {});

}  // namespace drbl
