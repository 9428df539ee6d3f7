#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "drbl/tensor.hpp"

namespace drbl {

/// Row-major boolean mask (1 = keep) with the same extents as the tensor it
/// qualifies. An empty mask means "everything kept".
using Mask = std::vector<std::uint8_t>;

enum class Elementwise { add, sub, mul, tanh, relu, sigmoid, exp };
enum class Reduction { max, mean };

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose(Tape<T>& tape, const Tensor<T>& a);

/// Pointwise op. Binary kinds require identical shapes; unary kinds ignore `b`.
template <typename T>
Tensor<T> elementwise(Tape<T>& tape, Elementwise kind, const Tensor<T>& a,
                      const Tensor<T>& b = Tensor<T>());

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(tape, Elementwise::add, a, b);
}
template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(tape, Elementwise::sub, a, b);
}
template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(tape, Elementwise::mul, a, b);
}
template <typename T>
Tensor<T> tanh(Tape<T>& tape, const Tensor<T>& a) {
  return elementwise(tape, Elementwise::tanh, a);
}
template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& a) {
  return elementwise(tape, Elementwise::relu, a);
}
template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& a) {
  return elementwise(tape, Elementwise::sigmoid, a);
}

/// a[n×m] + bias[1×m], the bias row added to every row.
template <typename T>
Tensor<T> add_row(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& bias);

template <typename T>
Tensor<T> concat(Tape<T>& tape, std::span<const Tensor<T>> parts, std::size_t axis);

template <typename T>
Tensor<T> concat(Tape<T>& tape, std::initializer_list<Tensor<T>> parts, std::size_t axis) {
  return concat(tape, std::span<const Tensor<T>>(parts.begin(), parts.size()), axis);
}

/// Half-open range [begin, end) along `axis` of a matrix.
template <typename T>
Tensor<T> slice(Tape<T>& tape, const Tensor<T>& a, std::size_t axis, std::size_t begin,
                std::size_t end);

/// Row-wise softmax with max subtraction. Masked entries are exactly zero and
/// do not take part in normalization.
template <typename T>
Tensor<T> softmax_rows(Tape<T>& tape, const Tensor<T>& a, std::span<const std::uint8_t> mask = {});

/// Reduces a matrix along `axis` (0: over rows -> 1×m, 1: over columns -> n×1).
/// Max ties send the gradient to the lowest index.
template <typename T>
Tensor<T> reduce(Tape<T>& tape, Reduction kind, const Tensor<T>& a, std::size_t axis);

/// Elementwise maximum; on ties the gradient goes to `a`.
template <typename T>
Tensor<T> maximum(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// Inverted dropout. Identity when !training or rate == 0.
template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& a, double rate, std::mt19937_64& rng,
                  bool training);

/// Gathers rows of `table`. Rows listed in `frozen` never receive gradient.
template <typename T>
Tensor<T> gather_rows(Tape<T>& tape, const Tensor<T>& table, std::span<const std::size_t> indices,
                      std::span<const std::size_t> frozen = {});

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a);

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T factor);

/// -log(max(probs[0][label], floor)) for a 1×C probability row.
template <typename T>
Tensor<T> negative_log_likelihood(Tape<T>& tape, const Tensor<T>& probs, std::size_t label,
                                  T floor = T(1e-12));

}  // namespace drbl
