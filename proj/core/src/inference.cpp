#include "drbl/inference.hpp"

#include "drbl/ops.hpp"

namespace drbl {

template <typename T>
InferenceReadings<T> dependent_inference(Tape<T>& tape, const Tensor<T>& premise,
                                         const Tensor<T>& hypothesis, const LstmParams<T>& params,
                                         std::size_t premise_length,
                                         std::size_t hypothesis_length) {
  const auto reading = dependent_encode(tape, premise, hypothesis, params, premise_length,
                                        hypothesis_length);
  return {reading.premise_independent, reading.premise_dependent,
          reading.hypothesis_independent, reading.hypothesis_dependent};
}

template <typename T>
Tensor<T> dual_max_pool(Tape<T>& tape, const Tensor<T>& independent, const Tensor<T>& dependent) {
  return maximum(tape, independent, dependent);
}

template <typename T>
Tensor<T> pool_fixed(Tape<T>& tape, const Tensor<T>& sequence, std::span<const std::uint8_t> mask,
                     bool use_max, bool use_mean) {
  if (!use_max && !use_mean) throw ConfigError("pool_fixed: both max and mean pooling disabled");
  if (sequence.rank() != 2) throw ShapeError("pool_fixed: expected a matrix");
  const std::size_t rows = sequence.rows();
  if (!mask.empty() && mask.size() != rows) throw ShapeError("pool_fixed: mask length mismatch");
  Tensor<T> real = sequence;
  if (!mask.empty()) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < rows; ++i)
      if (mask[i]) keep.push_back(i);
    if (keep.size() != rows) real = gather_rows(tape, sequence, std::span<const std::size_t>(keep));
  }
  if (real.rows() == 0) throw ContractError("pool_fixed: empty sequence");
  std::vector<Tensor<T>> parts;
  if (use_max) parts.push_back(reduce(tape, Reduction::max, real, 0));
  if (use_mean) parts.push_back(reduce(tape, Reduction::mean, real, 0));
  return parts.size() == 1 ? parts[0] : concat(tape, std::span<const Tensor<T>>(parts), 1);
}

#define DRBL_INSTANTIATE_INFERENCE(T)                                                          \
  template InferenceReadings<T> dependent_inference(Tape<T>&, const Tensor<T>&,                \
                                                    const Tensor<T>&, const LstmParams<T>&,    \
                                                    std::size_t, std::size_t);                 \
  template Tensor<T> dual_max_pool(Tape<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> pool_fixed(Tape<T>&, const Tensor<T>&, std::span<const std::uint8_t>, bool, \
                                bool);

DRBL_INSTANTIATE_INFERENCE(float)
DRBL_INSTANTIATE_INFERENCE(double)

}  // namespace drbl
