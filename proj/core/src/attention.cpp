#include "drbl/attention.hpp"

#include <cmath>

#include "drbl/ops.hpp"

namespace drbl {
namespace {

Mask outer_mask(std::size_t rows, std::span<const std::uint8_t> col_mask) {
  if (col_mask.empty()) return {};
  Mask m(rows * col_mask.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < col_mask.size(); ++j) m[i * col_mask.size() + j] = col_mask[j];
  return m;
}

template <typename T>
Tensor<T> zero_padded_rows(Tape<T>& tape, const Tensor<T>& x, std::span<const std::uint8_t> mask) {
  if (mask.empty()) return x;
  bool all = true;
  for (auto v : mask) all = all && v;
  if (all) return x;
  const std::size_t n = x.rows(), w = x.cols();
  std::vector<T> keep(n * w);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w; ++j) keep[i * w + j] = mask[i] ? T(1) : T(0);
  return mul(tape, x, Tensor<T>::from({n, w}, std::move(keep)));
}

}  // namespace

template <typename T>
ProjectionParams<T> ProjectionParams<T>::init(std::size_t input_dim, std::size_t output_dim,
                                              Activation activation, std::mt19937_64& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(input_dim));
  std::uniform_real_distribution<double> uniform(-k, k);
  std::vector<T> w(input_dim * output_dim);
  for (auto& v : w) v = static_cast<T>(uniform(rng));
  ProjectionParams p;
  p.weights = Tensor<T>::from({input_dim, output_dim}, std::move(w), true);
  p.bias = Tensor<T>::zeros({1, output_dim}, true);
  p.activation = activation;
  return p;
}

template <typename T>
std::vector<Parameter<T>> ProjectionParams<T>::parameters(const std::string& prefix) const {
  return {{prefix + ".W", weights, {}}, {prefix + ".b", bias, {}}};
}

template <typename T>
Tensor<T> energy(Tape<T>& tape, const Tensor<T>& premise, const Tensor<T>& hypothesis) {
  if (premise.rank() != 2 || hypothesis.rank() != 2 || premise.cols() != hypothesis.cols()) {
    throw ShapeError("energy: encoded widths disagree, " + shape_string(premise.shape()) + " vs " +
                     shape_string(hypothesis.shape()));
  }
  return matmul(tape, premise, transpose(tape, hypothesis));
}

template <typename T>
AlignmentOutput<T> align(Tape<T>& tape, const Tensor<T>& e, const Tensor<T>& premise,
                         const Tensor<T>& hypothesis, std::span<const std::uint8_t> premise_mask,
                         std::span<const std::uint8_t> hypothesis_mask) {
  const std::size_t n = premise.rows(), m = hypothesis.rows();
  if (e.rank() != 2 || e.rows() != n || e.cols() != m) {
    throw ShapeError("align: energy " + shape_string(e.shape()) + " does not match " +
                     std::to_string(n) + " premise and " + std::to_string(m) + " hypothesis rows");
  }
  if ((!premise_mask.empty() && premise_mask.size() != n) ||
      (!hypothesis_mask.empty() && hypothesis_mask.size() != m)) {
    throw ShapeError("align: token mask length does not match sentence length");
  }
  AlignmentOutput<T> out;
  const Mask row_mask = outer_mask(n, hypothesis_mask);
  out.premise_weights = softmax_rows(tape, e, row_mask);
  out.premise_attended =
      zero_padded_rows(tape, matmul(tape, out.premise_weights, hypothesis), premise_mask);

  const Mask col_mask = outer_mask(m, premise_mask);
  out.hypothesis_weights = softmax_rows(tape, transpose(tape, e), col_mask);
  out.hypothesis_attended =
      zero_padded_rows(tape, matmul(tape, out.hypothesis_weights, premise), hypothesis_mask);
  return out;
}

template <typename T>
Tensor<T> enrich(Tape<T>& tape, const Tensor<T>& encoded, const Tensor<T>& attended,
                 EnrichmentTerms terms) {
  if (encoded.shape() != attended.shape()) {
    throw ShapeError("enrich: shape mismatch " + shape_string(encoded.shape()) + " vs " +
                     shape_string(attended.shape()));
  }
  std::vector<Tensor<T>> parts{encoded, attended};
  if (terms.difference) parts.push_back(sub(tape, encoded, attended));
  if (terms.product) parts.push_back(mul(tape, encoded, attended));
  return concat(tape, std::span<const Tensor<T>>(parts), 1);
}

template <typename T>
Tensor<T> enrich_project(Tape<T>& tape, const Tensor<T>& encoded, const Tensor<T>& attended,
                         const ProjectionParams<T>& params, EnrichmentTerms terms,
                         double dropout_rate, std::mt19937_64* rng, bool training) {
  Tensor<T> a = enrich(tape, encoded, attended, terms);
  if (a.cols() != params.weights.rows()) {
    throw ShapeError("enrich_project: enriched width " + std::to_string(a.cols()) +
                     " does not match projector input " + std::to_string(params.weights.rows()));
  }
  if (training && dropout_rate > 0.0) {
    if (!rng) throw ContractError("enrich_project: dropout needs a generator");
    a = dropout(tape, a, dropout_rate, *rng, training);
  }
  const Tensor<T> pre = add_row(tape, matmul(tape, a, params.weights), params.bias);
  return params.activation == Activation::relu ? relu(tape, pre) : tanh(tape, pre);
}

#define DRBL_INSTANTIATE_ATTENTION(T)                                                             \
  template struct ProjectionParams<T>;                                                            \
  template Tensor<T> energy(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                        \
  template AlignmentOutput<T> align(Tape<T>&, const Tensor<T>&, const Tensor<T>&,                 \
                                    const Tensor<T>&, std::span<const std::uint8_t>,              \
                                    std::span<const std::uint8_t>);                               \
  template Tensor<T> enrich(Tape<T>&, const Tensor<T>&, const Tensor<T>&, EnrichmentTerms);       \
  template Tensor<T> enrich_project(Tape<T>&, const Tensor<T>&, const Tensor<T>&,                 \
                                    const ProjectionParams<T>&, EnrichmentTerms, double,          \
                                    std::mt19937_64*, bool);

DRBL_INSTANTIATE_ATTENTION(float)
DRBL_INSTANTIATE_ATTENTION(double)

}  // namespace drbl
