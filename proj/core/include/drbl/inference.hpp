#pragma once

#include <cstdint>
#include <span>

#include "drbl/encoder.hpp"
#include "drbl/tensor.hpp"

namespace drbl {

template <typename T>
struct InferenceReadings {
  Tensor<T> premise_independent;     // p̄
  Tensor<T> premise_dependent;       // p̂
  Tensor<T> hypothesis_independent;  // q̄
  Tensor<T> hypothesis_dependent;    // q̂
};

/// Independent and dependent BiLSTM readings of the projected matching
/// sequences, all passes sharing `params`.
template <typename T>
InferenceReadings<T> dependent_inference(Tape<T>& tape, const Tensor<T>& premise,
                                         const Tensor<T>& hypothesis, const LstmParams<T>& params,
                                         std::size_t premise_length = kFullLength,
                                         std::size_t hypothesis_length = kFullLength);

/// Elementwise maximum of the independent and dependent readings.
template <typename T>
Tensor<T> dual_max_pool(Tape<T>& tape, const Tensor<T>& independent, const Tensor<T>& dependent);

/// [column max, column mean] over the real rows (mask entry 1). Either block
/// can be switched off; at least one must remain.
template <typename T>
Tensor<T> pool_fixed(Tape<T>& tape, const Tensor<T>& sequence,
                     std::span<const std::uint8_t> mask = {}, bool use_max = true,
                     bool use_mean = true);

}  // namespace drbl
