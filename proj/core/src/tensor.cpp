#include "drbl/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

namespace drbl {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::filled(Shape shape, T value, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return from(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw ShapeError("tensor of shape " + shape_string(shape) + " cannot hold " +
                     std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<TensorNode<T>>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::matrix(std::initializer_list<std::initializer_list<T>> rows,
                            bool requires_grad) {
  const std::size_t n = rows.size();
  const std::size_t m = n ? rows.begin()->size() : 0;
  std::vector<T> values;
  values.reserve(n * m);
  for (const auto& r : rows) {
    if (r.size() != m) throw ShapeError("ragged matrix literal");
    values.insert(values.end(), r.begin(), r.end());
  }
  return from({n, m}, std::move(values), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::row(std::vector<T> values, bool requires_grad) {
  const std::size_t n = values.size();
  return from({1, n}, std::move(values), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from({1, 1}, {value}, requires_grad);
}

template <typename T>
std::size_t Tensor<T>::rows() const {
  if (rank() != 2) throw ShapeError("expected a matrix, got " + shape_string(shape()));
  return node_->shape[0];
}

template <typename T>
std::size_t Tensor<T>::cols() const {
  if (rank() != 2) throw ShapeError("expected a matrix, got " + shape_string(shape()));
  return node_->shape[1];
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return node_->data[0];
}

template <typename T>
void Tensor<T>::zero_grad() {
  node_->grad.assign(node_->data.size(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  auto node = std::make_shared<TensorNode<T>>();
  node->shape = node_->shape;
  node->data = node_->data;
  node->requires_grad = node_->requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tape<T>::record(Shape shape, std::vector<T> values, std::vector<Tensor<T>> inputs,
                          Backward backward) {
  Tensor<T> out = Tensor<T>::from(std::move(shape), std::move(values));
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor<T>& t) { return t.requires_grad(); });
  if (needs) {
    out.node_->tape = this;
    out.node_->requires_grad = true;
    entries_.push_back({out, std::move(inputs), std::move(backward)});
  }
  return out;
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  backward_local(loss);
  flush_leaf_grads();
}

template <typename T>
void Tape<T>::backward_local(const Tensor<T>& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward requires a scalar loss, got " +
                        (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;
  if (owns(loss)) {
    grad_buffer(loss)[0] += T(1);
  } else {
    leaf_grad(loss).dense.assign(1, T(1));
    return;
  }
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    const auto& grad = it->output.node_->grad;
    if (grad.empty()) continue;
    it->backward(*this, it->output, grad);
  }
}

template <typename T>
void Tape<T>::flush_leaf_grads() {
  for (auto& [node, lg] : leaf_grads_) {
    auto& target = lg.leaf.node_->grad;
    if (target.size() != lg.leaf.size()) target.assign(lg.leaf.size(), T(0));
    if (!lg.dense.empty()) {
      for (std::size_t i = 0; i < target.size(); ++i) target[i] += lg.dense[i];
    }
    if (!lg.rows.empty()) {
      const std::size_t width = lg.leaf.cols();
      for (const auto& [row, g] : lg.rows) {
        T* dst = target.data() + row * width;
        for (std::size_t j = 0; j < width; ++j) dst[j] += g[j];
      }
    }
  }
  leaf_grads_.clear();
}

template <typename T>
typename Tape<T>::LeafGrad& Tape<T>::leaf_grad(const Tensor<T>& t) {
  auto [it, inserted] = leaf_grads_.try_emplace(t.id());
  if (inserted) it->second.leaf = t;
  return it->second;
}

template <typename T>
std::span<T> Tape<T>::grad_buffer(const Tensor<T>& t) {
  if (owns(t)) {
    auto& g = t.node_->grad;
    if (g.empty()) g.assign(t.size(), T(0));
    return g;
  }
  auto& lg = leaf_grad(t);
  if (lg.dense.empty()) lg.dense.assign(t.size(), T(0));
  return lg.dense;
}

template <typename T>
void Tape<T>::add_row_grad(const Tensor<T>& t, std::size_t row, std::span<const T> g) {
  if (owns(t)) {
    auto buf = grad_buffer(t);
    const std::size_t width = t.cols();
    for (std::size_t j = 0; j < width; ++j) buf[row * width + j] += g[j];
    return;
  }
  auto& acc = leaf_grad(t).rows[row];
  if (acc.empty()) acc.assign(g.size(), T(0));
  for (std::size_t j = 0; j < g.size(); ++j) acc[j] += g[j];
}

template <typename T>
void Tape<T>::clear() {
  for (auto& e : entries_) {
    e.output.node_->grad.clear();
    e.output.node_->tape = nullptr;
  }
  entries_.clear();
  leaf_grads_.clear();
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace drbl
