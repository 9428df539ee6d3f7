#pragma once

#include <limits>
#include <random>
#include <string>
#include <vector>

#include "drbl/tensor.hpp"

namespace drbl {

inline constexpr std::size_t kFullLength = std::numeric_limits<std::size_t>::max();

/// One LSTM direction. Gate blocks along the 4d axis are ordered
/// input, forget, cell candidate, output.
template <typename T>
struct LstmDirection {
  Tensor<T> input_weights;      // in × 4d
  Tensor<T> recurrent_weights;  // d × 4d
  Tensor<T> bias;               // 1 × 4d

  std::size_t input_dim() const { return input_weights.rows(); }
  std::size_t hidden_dim() const { return recurrent_weights.rows(); }
};

template <typename T>
struct LstmParams {
  LstmDirection<T> forward;
  LstmDirection<T> backward;

  /// Weights uniform in ±1/sqrt(d), forget-gate bias 1, other biases 0.
  static LstmParams init(std::size_t input_dim, std::size_t hidden_dim, std::mt19937_64& rng);

  std::size_t input_dim() const { return forward.input_dim(); }
  std::size_t hidden_dim() const { return forward.hidden_dim(); }
  std::vector<Parameter<T>> parameters(const std::string& prefix) const;
};

template <typename T>
struct CellState {
  Tensor<T> hidden;  // 1 × d
  Tensor<T> memory;  // 1 × d

  static CellState zero(std::size_t hidden_dim);
};

template <typename T>
struct RnnState {
  CellState<T> forward;
  CellState<T> backward;

  static RnnState zero(std::size_t hidden_dim);
};

/// Standard forget-gate LSTM update for one step.
template <typename T>
CellState<T> lstm_cell(Tape<T>& tape, const Tensor<T>& input, const CellState<T>& state,
                       const LstmDirection<T>& params);

template <typename T>
struct BiLstmOutput {
  Tensor<T> hiddens;  // T × 2d, [forward | backward]
  RnnState<T> final;  // forward after the last real step, backward after the first
};

/// Reads rows [0, length) of `sequence` in both directions from `init`.
/// Rows at or past `length` are padding: they produce zero hidden rows and
/// never touch the final state.
template <typename T>
BiLstmOutput<T> bilstm(Tape<T>& tape, const Tensor<T>& sequence, const RnnState<T>& init,
                       const LstmParams<T>& params, std::size_t length = kFullLength);

template <typename T>
struct DependentReading {
  Tensor<T> premise_dependent;        // û
  Tensor<T> hypothesis_dependent;     // v̂
  Tensor<T> premise_independent;      // ū
  Tensor<T> hypothesis_independent;   // v̄
  RnnState<T> premise_state;          // s_u
  RnnState<T> hypothesis_state;       // s_v
};

/// Each sentence is read once from the zero state and once more starting from
/// the other sentence's final state. All four passes share `params`.
template <typename T>
DependentReading<T> dependent_encode(Tape<T>& tape, const Tensor<T>& premise,
                                     const Tensor<T>& hypothesis, const LstmParams<T>& params,
                                     std::size_t premise_length = kFullLength,
                                     std::size_t hypothesis_length = kFullLength);

template <typename T>
struct EncodedPair {
  Tensor<T> premise;
  Tensor<T> hypothesis;
};

/// rounds = 1: independent readings; 2: one cross-read each way;
/// 3: the final state is threaded through other -> self -> other before the
/// last read.
template <typename T>
EncodedPair<T> multi_round_encode(Tape<T>& tape, const Tensor<T>& premise,
                                  const Tensor<T>& hypothesis, const LstmParams<T>& params,
                                  int rounds, std::size_t premise_length = kFullLength,
                                  std::size_t hypothesis_length = kFullLength);

}  // namespace drbl
