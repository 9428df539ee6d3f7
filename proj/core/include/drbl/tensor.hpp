#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "drbl/errors.hpp"

namespace drbl {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

template <typename T>
class Tape;

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  // Leaves: accumulated by Tape::flush_leaf_grads. Tape-produced nodes: scratch
  // space owned by the producing tape during its backward sweep.
  std::vector<T> grad;
  bool requires_grad = false;
  const void* tape = nullptr;
};

/// Shared handle to a dense row-major array. Copies alias the same storage;
/// use clone() for a deep copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<T>> rows,
                       bool requires_grad = false);
  static Tensor row(std::vector<T> values, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const T> values() const { return node_->data; }
  std::span<T> mutable_values() { return node_->data; }
  T operator()(std::size_t i, std::size_t j) const { return node_->data[i * cols() + j]; }
  T& at(std::size_t i, std::size_t j) { return node_->data[i * cols() + j]; }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }
  /// Accumulated leaf gradient; empty until a backward pass reaches this leaf.
  std::span<const T> grad() const { return node_->grad; }
  std::vector<T>& mutable_grad() { return node_->grad; }
  void zero_grad();

  Tensor clone() const;
  const TensorNode<T>* id() const noexcept { return node_.get(); }
  TensorNode<T>* node() const noexcept { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorNode<T>> node) : node_(std::move(node)) {}
  friend class Tape<T>;

  std::shared_ptr<TensorNode<T>> node_;
};

/// Records differentiable operations in execution order. Every op output
/// requiring a gradient is appended after its inputs, so a reverse sweep is a
/// valid topological order.
///
/// Leaf gradients are staged in the tape and only written into the leaves by
/// flush_leaf_grads(), so separate tapes can run backward concurrently over
/// shared parameters.
template <typename T>
class Tape {
 public:
  using Backward =
      std::function<void(Tape&, const Tensor<T>& out, std::span<const T> out_grad)>;

  Tape() = default;
  ~Tape() { clear(); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Creates an op output. When any input requires a gradient the op is
  /// recorded together with its local backward rule.
  Tensor<T> record(Shape shape, std::vector<T> values, std::vector<Tensor<T>> inputs,
                   Backward backward);

  void backward(const Tensor<T>& loss);
  void backward_local(const Tensor<T>& loss);
  void flush_leaf_grads();

  /// Dense gradient buffer for `t`, created zeroed on first use.
  std::span<T> grad_buffer(const Tensor<T>& t);
  /// Row-sparse accumulation into a leaf matrix (embedding gathers).
  void add_row_grad(const Tensor<T>& t, std::size_t row, std::span<const T> g);

  /// Folds a discrete forward decision (ReLU side, max winner, clamp) into a
  /// running signature. Two runs with equal signatures took the same
  /// piecewise-smooth branch.
  void note_branch(std::uint64_t decision) noexcept {
    branches_ = (branches_ ^ decision) * 1099511628211ULL;
  }
  std::uint64_t branch_signature() const noexcept { return branches_; }

  std::size_t size() const noexcept { return entries_.size(); }
  bool owns(const Tensor<T>& t) const noexcept { return t.node_->tape == this; }
  void clear();

 private:
  struct Entry {
    Tensor<T> output;
    std::vector<Tensor<T>> inputs;
    Backward backward;
  };
  struct LeafGrad {
    Tensor<T> leaf;
    std::vector<T> dense;
    std::map<std::size_t, std::vector<T>> rows;
  };

  LeafGrad& leaf_grad(const Tensor<T>& t);

  std::vector<Entry> entries_;
  std::unordered_map<const TensorNode<T>*, LeafGrad> leaf_grads_;
  std::uint64_t branches_ = 1469598103934665603ULL;
};

/// A named trainable tensor. Frozen rows never receive gradient.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
  std::vector<std::size_t> frozen_rows;
};

}  // namespace drbl
