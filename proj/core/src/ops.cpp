#include "drbl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace drbl {
namespace {

template <typename T>
void require_matrix(const Tensor<T>& a, const char* op) {
  if (!a.defined() || a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " +
                     (a.defined() ? shape_string(a.shape()) : std::string("undefined")));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!b.defined() || a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     (b.defined() ? shape_string(b.shape()) : std::string("undefined")));
  }
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// C[n×m] += A[n×k] · B[k×m]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    T* ci = c + i * m;
    for (std::size_t t = 0; t < k; ++t) {
      const T av = a[i * k + t];
      if (av == T(0)) continue;
      const T* bt = b + t * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bt[j];
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dimensions disagree for " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  std::vector<T> out(n * m, T(0));
  gemm_nn(a.values().data(), b.values().data(), out.data(), n, k, m);
  return tape.record({n, m}, std::move(out), {a, b},
                     [a, b, n, k, m](Tape<T>& tp, const Tensor<T>&, std::span<const T> g) {
                       if (a.requires_grad()) {
                         // dA = G · Bᵀ
                         auto ga = tp.grad_buffer(a);
                         const T* bv = b.values().data();
                         for (std::size_t i = 0; i < n; ++i) {
                           const T* gi = g.data() + i * m;
                           for (std::size_t t = 0; t < k; ++t) {
                             const T* bt = bv + t * m;
                             T acc = 0;
                             for (std::size_t j = 0; j < m; ++j) acc += gi[j] * bt[j];
                             ga[i * k + t] += acc;
                           }
                         }
                       }
                       if (b.requires_grad()) {
                         // dB = Aᵀ · G
                         auto gb = tp.grad_buffer(b);
                         const T* av = a.values().data();
                         for (std::size_t i = 0; i < n; ++i) {
                           const T* gi = g.data() + i * m;
                           for (std::size_t t = 0; t < k; ++t) {
                             const T ait = av[i * k + t];
                             if (ait == T(0)) continue;
                             T* gbt = gb.data() + t * m;
                             for (std::size_t j = 0; j < m; ++j) gbt[j] += ait * gi[j];
                           }
                         }
                       }
                     });
}

template <typename T>
Tensor<T> transpose(Tape<T>& tape, const Tensor<T>& a) {
  require_matrix(a, "transpose");
  const std::size_t n = a.rows(), m = a.cols();
  std::vector<T> out(n * m);
  const auto av = a.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = av[i * m + j];
  return tape.record({m, n}, std::move(out), {a},
                     [a, n, m](Tape<T>& tp, const Tensor<T>&, std::span<const T> g) {
                       auto ga = tp.grad_buffer(a);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += g[j * n + i];
                     });
}

template <typename T>
Tensor<T> elementwise(Tape<T>& tape, Elementwise kind, const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.defined()) throw ShapeError("elementwise: undefined operand");
  const auto av = a.values();
  const std::size_t n = av.size();
  std::vector<T> out(n);
  switch (kind) {
    case Elementwise::add:
    case Elementwise::sub:
    case Elementwise::mul: {
      require_same_shape(a, b, "elementwise");
      const auto bv = b.values();
      if (kind == Elementwise::add)
        for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i];
      else if (kind == Elementwise::sub)
        for (std::size_t i = 0; i < n; ++i) out[i] = av[i] - bv[i];
      else
        for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[i];
      return tape.record(
          a.shape(), std::move(out), {a, b},
          [a, b, kind, n](Tape<T>& tp, const Tensor<T>&, std::span<const T> g) {
            if (a.requires_grad()) {
              auto ga = tp.grad_buffer(a);
              if (kind == Elementwise::mul) {
                const auto bv = b.values();
                for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
              } else {
                for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
              }
            }
            if (b.requires_grad()) {
              auto gb = tp.grad_buffer(b);
              if (kind == Elementwise::mul) {
                const auto av = a.values();
                for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
              } else if (kind == Elementwise::sub) {
                for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
              } else {
                for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
              }
            }
          });
    }
    case Elementwise::tanh:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(av[i]);
      return tape.record(a.shape(), std::move(out), {a},
                         [a, n](Tape<T>& tp, const Tensor<T>& y, std::span<const T> g) {
                           auto ga = tp.grad_buffer(a);
                           const auto yv = y.values();
                           for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * (T(1) - yv[i] * yv[i]);
                         });
    case Elementwise::sigmoid:
      for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid_scalar(av[i]);
      return tape.record(a.shape(), std::move(out), {a},
                         [a, n](Tape<T>& tp, const Tensor<T>& y, std::span<const T> g) {
                           auto ga = tp.grad_buffer(a);
                           const auto yv = y.values();
                           for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * yv[i] * (T(1) - yv[i]);
                         });
    case Elementwise::relu:
      for (std::size_t i = 0; i < n; ++i) {
        out[i] = av[i] > T(0) ? av[i] : T(0);
        tape.note_branch(av[i] > T(0));
      }
      return tape.record(a.shape(), std::move(out), {a},
                         [a, n](Tape<T>& tp, const Tensor<T>&, std::span<const T> g) {
                           auto ga = tp.grad_buffer(a);
                           const auto xv = a.values();
                           for (std::size_t i = 0; i < n; ++i)
                             if (xv[i] > T(0)) ga[i] += g[i];
                         });
    case Elementwise::exp:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(av[i]);
      return tape.record(a.shape(), std::move(out), {a},
                         [a, n](Tape<T>& tp, const Tensor<T>& y, std::span<const T> g) {
                           auto ga = tp.grad_buffer(a);
                           const auto yv = y.values();
                           for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * yv[i];
                         });
  }
  throw ContractError("elementwise: unknown kind");
}

template <typename T>
Tensor<T> add_row(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& bias) {
  require_matrix(a, "add_row");
  require_matrix(bias, "add_row");
  const std::size_t n = a.rows(), m = a.cols();
  if (bias.rows() != 1 || bias.cols() != m) {
    throw ShapeError("add_row: bias " + shape_string(bias.shape()) + " does not fit " +
                     shape_string(a.shape()));
  }
  std::vector<T> out(a.values().begin(), a.values().end());
  const auto bv = bias.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bv[j];
  return tape.record(a.shape(), std::move(out), {a, bias},
                     [a, bias, n, m](Tape<T>& tp, const Tensor<T>&, std::span<const T> g) {
                       if (a.requires_grad()) {
                         auto ga = tp.grad_buffer(a);
                         for (std::size_t i = 0; i < n * m; ++i) ga[i] += g[i];
                       }
                       if (bias.requires_grad()) {
                         auto gb = tp.grad_buffer(bias);
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
                       }
                     });
}

template <typename T>
Tensor<T> concat(Tape<T>& tape, std::span<const Tensor<T>> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis > 1) throw ShapeError("concat: axis must be 0 or 1");
  for (const auto& p : parts) require_matrix(p, "concat");
  const std::size_t other = 1 - axis;
  const std::size_t fixed = parts[0].dim(other);
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.dim(other) != fixed) {
      throw ShapeError("concat: incompatible shapes " + shape_string(parts[0].shape()) + " and " +
                       shape_string(p.shape()) + " on axis " + std::to_string(axis));
    }
    total += p.dim(axis);
  }
  const std::size_t rows = axis == 0 ? total : fixed;
  const std::size_t cols = axis == 0 ? fixed : total;
  std::vector<T> out(rows * cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto pv = p.values();
    const std::size_t pr = p.rows(), pc = p.cols();
    for (std::size_t i = 0; i < pr; ++i)
      for (std::size_t j = 0; j < pc; ++j) {
        const std::size_t r = axis == 0 ? offset + i : i;
        const std::size_t c = axis == 0 ? j : offset + j;
        out[r * cols + c] = pv[i * pc + j];
      }
    offset += p.dim(axis);
  }
  std::vector<Tensor<T>> inputs(parts.begin(), parts.end());
  return tape.record({rows, cols}, std::move(out), inputs,
                     [inputs, axis, cols](Tape<T>& tp, const Tensor<T>&, std::span<const T> g) {
                       std::size_t offset = 0;
                       for (const auto& p : inputs) {
                         const std::size_t pr = p.rows(), pc = p.cols();
                         if (p.requires_grad()) {
                           auto gp = tp.grad_buffer(p);
                           for (std::size_t i = 0; i < pr; ++i)
                             for (std::size_t j = 0; j < pc; ++j) {
                               const std::size_t r = axis == 0 ? offset + i : i;
                               const std::size_t c = axis == 0 ? j : offset + j;
                               gp[i * pc + j] += g[r * cols + c];
                             }
                         }
                         offset += p.dim(axis);
                       }
                     });
}

template <typename T>
Tensor<T> slice(Tape<T>& tape, const Tensor<T>& a, std::size_t axis, std::size_t begin,
                std::size_t end) {
  require_matrix(a, "slice");
  if (axis > 1 || begin > end || end > a.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of bounds for " + shape_string(a.shape()) + " on axis " +
                     std::to_string(axis));
  }
  const std::size_t n = a.rows(), m = a.cols();
  const std::size_t rows = axis == 0 ? end - begin : n;
  const std::size_t cols = axis == 0 ? m : end - begin;
  std::vector<T> out(rows * cols);
  const auto av = a.values();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t si = axis == 0 ? begin + i : i;
      const std::size_t sj = axis == 0 ? j : begin + j;
      out[i * cols + j] = av[si * m + sj];
    }
  return tape.record(
      {rows, cols}, std::move(out), {a},
      [a, axis, begin, rows, cols, m](Tape<T>& tp, const Tensor<T>&, std::span<const T> g) {
        auto ga = tp.grad_buffer(a);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) {
            const std::size_t si = axis == 0 ? begin + i : i;
            const std::size_t sj = axis == 0 ? j : begin + j;
            ga[si * m + sj] += g[i * cols + j];
          }
      });
}

template <typename T>
Tensor<T> softmax_rows(Tape<T>& tape, const Tensor<T>& a, std::span<const std::uint8_t> mask) {
  require_matrix(a, "softmax_rows");
  const std::size_t n = a.rows(), m = a.cols();
  if (!mask.empty() && mask.size() != n * m) {
    throw ShapeError("softmax_rows: mask of " + std::to_string(mask.size()) +
                     " entries for " + shape_string(a.shape()));
  }
  const auto av = a.values();
  std::vector<T> out(n * m, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    T row_max = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < m; ++j) {
      if (!mask.empty() && !mask[i * m + j]) continue;
      row_max = std::max(row_max, av[i * m + j]);
      any = true;
    }
    if (!any) throw DegenerateRowError("softmax_rows: row " + std::to_string(i) + " is fully masked");
    T total = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!mask.empty() && !mask[i * m + j]) continue;
      out[i * m + j] = std::exp(av[i * m + j] - row_max);
      total += out[i * m + j];
    }
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] /= total;
  }
  return tape.record({n, m}, std::move(out), {a},
                     [a, n, m](Tape<T>& tp, const Tensor<T>& y, std::span<const T> g) {
                       auto ga = tp.grad_buffer(a);
                       const auto yv = y.values();
                       for (std::size_t i = 0; i < n; ++i) {
                         T dot = 0;
                         for (std::size_t j = 0; j < m; ++j) dot += g[i * m + j] * yv[i * m + j];
                         for (std::size_t j = 0; j < m; ++j)
                           ga[i * m + j] += yv[i * m + j] * (g[i * m + j] - dot);
                       }
                     });
}

template <typename T>
Tensor<T> reduce(Tape<T>& tape, Reduction kind, const Tensor<T>& a, std::size_t axis) {
  require_matrix(a, "reduce");
  if (axis > 1) throw ShapeError("reduce: axis must be 0 or 1");
  const std::size_t n = a.rows(), m = a.cols();
  const std::size_t extent = a.dim(axis);
  if (extent == 0) throw ShapeError("reduce: empty axis in " + shape_string(a.shape()));
  const std::size_t outer = axis == 0 ? m : n;
  const auto av = a.values();
  auto at = [&](std::size_t o, std::size_t k) { return axis == 0 ? k * m + o : o * m + k; };
  std::vector<T> out(outer);
  std::vector<std::size_t> argmax;
  if (kind == Reduction::max) {
    argmax.resize(outer);
    for (std::size_t o = 0; o < outer; ++o) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < extent; ++k)
        if (av[at(o, k)] > av[at(o, best)]) best = k;
      argmax[o] = best;
      out[o] = av[at(o, best)];
      tape.note_branch(best);
    }
  } else {
    for (std::size_t o = 0; o < outer; ++o) {
      T total = 0;
      for (std::size_t k = 0; k < extent; ++k) total += av[at(o, k)];
      out[o] = total / static_cast<T>(extent);
    }
  }
  Shape shape = axis == 0 ? Shape{1, m} : Shape{n, 1};
  return tape.record(
      std::move(shape), std::move(out), {a},
      [a, kind, axis, m, extent, outer, argmax = std::move(argmax)](
          Tape<T>& tp, const Tensor<T>&, std::span<const T> g) {
        auto ga = tp.grad_buffer(a);
        auto at = [&](std::size_t o, std::size_t k) { return axis == 0 ? k * m + o : o * m + k; };
        for (std::size_t o = 0; o < outer; ++o) {
          if (kind == Reduction::max) {
            ga[at(o, argmax[o])] += g[o];
          } else {
            const T share = g[o] / static_cast<T>(extent);
            for (std::size_t k = 0; k < extent; ++k) ga[at(o, k)] += share;
          }
        }
      });
}

template <typename T>
Tensor<T> maximum(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "maximum");
  const auto av = a.values(), bv = b.values();
  const std::size_t n = av.size();
  std::vector<T> out(n);
  std::vector<std::uint8_t> from_a(n);
  for (std::size_t i = 0; i < n; ++i) {
    from_a[i] = av[i] >= bv[i];
    out[i] = from_a[i] ? av[i] : bv[i];
    tape.note_branch(from_a[i]);
  }
  return tape.record(a.shape(), std::move(out), {a, b},
                     [a, b, n, from_a = std::move(from_a)](Tape<T>& tp, const Tensor<T>&,
                                                          std::span<const T> g) {
                       if (a.requires_grad()) {
                         auto ga = tp.grad_buffer(a);
                         for (std::size_t i = 0; i < n; ++i)
                           if (from_a[i]) ga[i] += g[i];
                       }
                       if (b.requires_grad()) {
                         auto gb = tp.grad_buffer(b);
                         for (std::size_t i = 0; i < n; ++i)
                           if (!from_a[i]) gb[i] += g[i];
                       }
                     });
}

template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& a, double rate, std::mt19937_64& rng,
                  bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return a;
  const std::size_t n = a.size();
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<T> factor(n);
  for (auto& f : factor) f = unit(rng) < rate ? T(0) : keep_scale;
  std::vector<T> out(n);
  const auto av = a.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * factor[i];
  return tape.record(a.shape(), std::move(out), {a},
                     [a, n, factor = std::move(factor)](Tape<T>& tp, const Tensor<T>&,
                                                        std::span<const T> g) {
                       auto ga = tp.grad_buffer(a);
                       for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * factor[i];
                     });
}

template <typename T>
Tensor<T> gather_rows(Tape<T>& tape, const Tensor<T>& table, std::span<const std::size_t> indices,
                      std::span<const std::size_t> frozen) {
  require_matrix(table, "gather_rows");
  const std::size_t width = table.cols();
  const std::size_t vocab = table.rows();
  std::vector<T> out(indices.size() * width);
  const auto tv = table.values();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= vocab) {
      throw ContractError("gather_rows: index " + std::to_string(indices[i]) +
                          " out of range for " + std::to_string(vocab) + " rows");
    }
    std::copy_n(tv.begin() + indices[i] * width, width, out.begin() + i * width);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<std::size_t> skip(frozen.begin(), frozen.end());
  return tape.record({indices.size(), width}, std::move(out), {table},
                     [table, idx = std::move(idx), skip = std::move(skip), width](
                         Tape<T>& tp, const Tensor<T>&, std::span<const T> g) {
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         if (std::find(skip.begin(), skip.end(), idx[i]) != skip.end()) continue;
                         tp.add_row_grad(table, idx[i], g.subspan(i * width, width));
                       }
                     });
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a) {
  T total = 0;
  for (T v : a.values()) total += v;
  return tape.record({1, 1}, {total}, {a},
                     [a](Tape<T>& tp, const Tensor<T>&, std::span<const T> g) {
                       auto ga = tp.grad_buffer(a);
                       for (auto& v : ga) v += g[0];
                     });
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T factor) {
  std::vector<T> out(a.values().begin(), a.values().end());
  for (auto& v : out) v *= factor;
  return tape.record(a.shape(), std::move(out), {a},
                     [a, factor](Tape<T>& tp, const Tensor<T>&, std::span<const T> g) {
                       auto ga = tp.grad_buffer(a);
                       for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * factor;
                     });
}

template <typename T>
Tensor<T> negative_log_likelihood(Tape<T>& tape, const Tensor<T>& probs, std::size_t label,
                                  T floor) {
  require_matrix(probs, "negative_log_likelihood");
  if (probs.rows() != 1 || label >= probs.cols()) {
    throw ContractError("negative_log_likelihood: label " + std::to_string(label) +
                        " invalid for " + shape_string(probs.shape()));
  }
  const T p = probs.values()[label];
  const bool clamped = p < floor;
  tape.note_branch(clamped);
  const T value = -std::log(clamped ? floor : p);
  return tape.record({1, 1}, {value}, {probs},
                     [probs, label, p, clamped](Tape<T>& tp, const Tensor<T>&,
                                                std::span<const T> g) {
                       if (clamped) return;
                       tp.grad_buffer(probs)[label] -= g[0] / p;
                     });
}

#define DRBL_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> transpose(Tape<T>&, const Tensor<T>&);                                       \
  template Tensor<T> elementwise(Tape<T>&, Elementwise, const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> add_row(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> concat(Tape<T>&, std::span<const Tensor<T>>, std::size_t);                   \
  template Tensor<T> slice(Tape<T>&, const Tensor<T>&, std::size_t, std::size_t, std::size_t);    \
  template Tensor<T> softmax_rows(Tape<T>&, const Tensor<T>&, std::span<const std::uint8_t>);     \
  template Tensor<T> reduce(Tape<T>&, Reduction, const Tensor<T>&, std::size_t);                  \
  template Tensor<T> maximum(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> dropout(Tape<T>&, const Tensor<T>&, double, std::mt19937_64&, bool);         \
  template Tensor<T> gather_rows(Tape<T>&, const Tensor<T>&, std::span<const std::size_t>,        \
                                 std::span<const std::size_t>);                                   \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                             \
  template Tensor<T> scale(Tape<T>&, const Tensor<T>&, T);                                        \
  template Tensor<T> negative_log_likelihood(Tape<T>&, const Tensor<T>&, std::size_t, T);

DRBL_INSTANTIATE_OPS(float)
DRBL_INSTANTIATE_OPS(double)

}  // namespace drbl
