//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "geqshift/equivariant.hpp"
#include "geqshift/error.hpp"
#include "geqshift/tensor_product.hpp"

namespace geqshift {

/// Dense row-major matrix; the value type flowing through the tape.
template <class T> struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, T{}) {}
  Matrix(int r, int c, std::vector<T> d) : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != static_cast<std::size_t>(r) * c)
      throw ConfigError("matrix data size mismatch");
  }

  std::size_t size() const { return data.size(); }
  T *row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
  const T *row(int i) const {
    return data.data() + static_cast<std::size_t>(i) * cols;
  }
  friend bool operator==(const Matrix &, const Matrix &) = default;
  T &operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  const T &operator()(int i, int j) const {
    return data[static_cast<std::size_t>(i) * cols + j];
  }
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Each recorded op stores its value and a closure that
/// pushes the output gradient back to its inputs. Nodes are appended in
/// evaluation order, so a reverse sweep is a valid topological order.
template <class T> class Tape {
 public:
  using Backward = std::function<void(Tape &, int self)>;

  Var constant(Matrix<T> value) { return push(std::move(value), false, {}); }
  Var variable(Matrix<T> value) { return push(std::move(value), true, {}); }

  Var record(Matrix<T> value, std::initializer_list<Var> inputs, Backward bw) {
    bool need = false;
    for (auto v : inputs)
      if (v.valid() && nodes_[v.id].needs_grad)
        need = true;
    return push(std::move(value), need, need ? std::move(bw) : Backward{});
  }

  const Matrix<T> &value(Var v) const { return nodes_[v.id].value; }
  bool needs_grad(Var v) const { return v.valid() && nodes_[v.id].needs_grad; }

  /// Gradient buffer, zero-initialized on first access.
  Matrix<T> &grad(Var v) {
    auto &n = nodes_[v.id];
    if (n.grad.size() != n.value.size())
      n.grad = Matrix<T>(n.value.rows, n.value.cols);
    return n.grad;
  }
  bool has_grad(Var v) const {
    return nodes_[v.id].grad.size() == nodes_[v.id].value.size() &&
           nodes_[v.id].value.size() > 0;
  }
  T *grad_ptr(Var v) { return needs_grad(v) ? grad(v).data.data() : nullptr; }

  /// Seeds d(loss)/d(loss) = 1 for a 1x1 node and sweeps backwards.
  void backward(Var loss) {
    if (value(loss).size() != 1)
      throw ConfigError("backward requires a scalar loss");
    grad(loss).data[0] = T(1);
    for (int i = loss.id; i >= 0; --i) {
      auto &n = nodes_[i];
      if (!n.needs_grad || !n.backward || !has_grad(Var{i}))
        continue;
      n.backward(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix<T> value;
    Matrix<T> grad;
    bool needs_grad = false;
    Backward backward;
  };

  Var push(Matrix<T> value, bool need, Backward bw) {
    nodes_.push_back({std::move(value), {}, need, std::move(bw)});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

namespace ops {

namespace detail {
template <class T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T> Eigen::Map<RowMajor<T>> map(Matrix<T> &m) {
  return {m.data.data(), m.rows, m.cols};
}
template <class T> Eigen::Map<const RowMajor<T>> map(const Matrix<T> &m) {
  return {m.data.data(), m.rows, m.cols};
}
}  // namespace detail

/// x[N x in] * W[in x out] + b[1 x out]. `b` may be invalid.
template <class T> Var dense(Tape<T> &tape, Var x, Var w, Var b) {
  const auto &X = tape.value(x);
  const auto &W = tape.value(w);
  if (X.cols != W.rows)
    throw ConfigError("dense: input width " + std::to_string(X.cols) +
                      " != weight rows " + std::to_string(W.rows));
  Matrix<T> out(X.rows, W.cols);
  auto O = detail::map(out);
  O.noalias() = detail::map(X) * detail::map(W);
  if (b.valid())
    O.rowwise() += detail::map(tape.value(b)).row(0);
  return tape.record(std::move(out), {x, w, b}, [x, w, b](Tape<T> &t, int self) {
    const auto &G = t.grad(Var{self});
    auto g = detail::map(G);
    if (t.needs_grad(x))
      detail::map(t.grad(x)).noalias() += g * detail::map(t.value(w)).transpose();
    if (t.needs_grad(w))
      detail::map(t.grad(w)).noalias() += detail::map(t.value(x)).transpose() * g;
    if (b.valid() && t.needs_grad(b))
      detail::map(t.grad(b)).row(0) += g.colwise().sum();
  });
}

template <class T> Var silu(Tape<T> &tape, Var x) {
  const auto &X = tape.value(x);
  Matrix<T> out(X.rows, X.cols);
  for (std::size_t i = 0; i < X.size(); ++i) {
    const T v = X.data[i];
    out.data[i] = v / (T(1) + std::exp(-v));
  }
  return tape.record(std::move(out), {x}, [x](Tape<T> &t, int self) {
    const auto &X = t.value(x);
    const auto &G = t.grad(Var{self});
    auto &gx = t.grad(x);
    for (std::size_t i = 0; i < X.size(); ++i) {
      const T v = X.data[i];
      const T s = T(1) / (T(1) + std::exp(-v));
      gx.data[i] += G.data[i] * (s + v * s * (T(1) - s));
    }
  });
}

template <class T> Var add(Tape<T> &tape, Var a, Var b) {
  const auto &A = tape.value(a);
  const auto &B = tape.value(b);
  if (A.rows != B.rows || A.cols != B.cols)
    throw ConfigError("add: shape mismatch");
  Matrix<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] += B.data[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T> &t, int self) {
    const auto &G = t.grad(Var{self});
    for (Var v : {a, b})
      if (t.needs_grad(v)) {
        auto &g = t.grad(v);
        for (std::size_t i = 0; i < g.size(); ++i)
          g.data[i] += G.data[i];
      }
  });
}

/// Column-wise concatenation [A | B].
template <class T> Var concat_cols(Tape<T> &tape, Var a, Var b) {
  const auto &A = tape.value(a);
  const auto &B = tape.value(b);
  if (A.rows != B.rows)
    throw ConfigError("concat: row mismatch");
  Matrix<T> out(A.rows, A.cols + B.cols);
  for (int n = 0; n < A.rows; ++n) {
    std::copy(A.row(n), A.row(n) + A.cols, out.row(n));
    std::copy(B.row(n), B.row(n) + B.cols, out.row(n) + A.cols);
  }
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T> &t, int self) {
    const auto &G = t.grad(Var{self});
    const int ca = t.value(a).cols, cb = t.value(b).cols;
    T *ga = t.grad_ptr(a);
    T *gb = t.grad_ptr(b);
    for (int n = 0; n < G.rows; ++n) {
      const T *g = G.row(n);
      if (ga)
        for (int j = 0; j < ca; ++j)
          ga[static_cast<std::size_t>(n) * ca + j] += g[j];
      if (gb)
        for (int j = 0; j < cb; ++j)
          gb[static_cast<std::size_t>(n) * cb + j] += g[ca + j];
    }
  });
}

/// Rows of `x` selected by `index` (embedding lookup or node->edge gather).
template <class T>
Var gather_rows(Tape<T> &tape, Var x, std::shared_ptr<const std::vector<int>> index) {
  const auto &X = tape.value(x);
  Matrix<T> out(static_cast<int>(index->size()), X.cols);
  for (std::size_t r = 0; r < index->size(); ++r) {
    const int src = (*index)[r];
    if (src < 0 || src >= X.rows)
      throw ConfigError("gather index out of range");
    std::copy(X.row(src), X.row(src) + X.cols, out.row(static_cast<int>(r)));
  }
  return tape.record(std::move(out), {x}, [x, index](Tape<T> &t, int self) {
    const auto &G = t.grad(Var{self});
    auto &gx = t.grad(x);
    for (std::size_t r = 0; r < index->size(); ++r) {
      T *dst = gx.row((*index)[r]);
      const T *g = G.row(static_cast<int>(r));
      for (int j = 0; j < G.cols; ++j)
        dst[j] += g[j];
    }
  });
}

/// Places the columns of x at positions `columns` of a zero matrix with
/// `width` columns.
template <class T>
Var scatter_columns(Tape<T> &tape, Var x, std::shared_ptr<const std::vector<int>> columns,
                    int width) {
  const auto &X = tape.value(x);
  Matrix<T> out(X.rows, width);
  for (int n = 0; n < X.rows; ++n)
    for (int j = 0; j < X.cols; ++j)
      out(n, (*columns)[j]) = X(n, j);
  return tape.record(std::move(out), {x}, [x, columns](Tape<T> &t, int self) {
    const auto &G = t.grad(Var{self});
    auto &gx = t.grad(x);
    for (int n = 0; n < gx.rows; ++n)
      for (int j = 0; j < gx.cols; ++j)
        gx(n, j) += G(n, (*columns)[j]);
  });
}

/// Row-wise scaled dot product: out[n] = scale * <a_n, b_n>.
template <class T> Var row_dot(Tape<T> &tape, Var a, Var b, T scale) {
  const auto &A = tape.value(a);
  const auto &B = tape.value(b);
  if (A.rows != B.rows || A.cols != B.cols)
    throw ConfigError("row_dot: shape mismatch");
  Matrix<T> out(A.rows, 1);
  for (int n = 0; n < A.rows; ++n) {
    T s{};
    for (int j = 0; j < A.cols; ++j)
      s += A(n, j) * B(n, j);
    out(n, 0) = scale * s;
  }
  return tape.record(std::move(out), {a, b}, [a, b, scale](Tape<T> &t, int self) {
    const auto &A = t.value(a);
    const auto &B = t.value(b);
    const auto &G = t.grad(Var{self});
    T *ga = t.grad_ptr(a);
    T *gb = t.grad_ptr(b);
    for (int n = 0; n < A.rows; ++n) {
      const T g = scale * G(n, 0);
      for (int j = 0; j < A.cols; ++j) {
        const std::size_t k = static_cast<std::size_t>(n) * A.cols + j;
        if (ga)
          ga[k] += g * B.data[k];
        if (gb)
          gb[k] += g * A.data[k];
      }
    }
  });
}

/// Softmax of a column of logits within segments (edges grouped by their
/// destination node). Each segment's maximum is subtracted before
/// exponentiation.
template <class T>
Var segment_softmax(Tape<T> &tape, Var logits, std::shared_ptr<const std::vector<int>> segment,
                    int num_segments) {
  const auto &L = tape.value(logits);
  std::vector<T> max(num_segments, -std::numeric_limits<T>::infinity());
  for (int e = 0; e < L.rows; ++e)
    max[(*segment)[e]] = std::max(max[(*segment)[e]], L(e, 0));
  std::vector<T> sum(num_segments, T{});
  Matrix<T> out(L.rows, 1);
  for (int e = 0; e < L.rows; ++e) {
    out(e, 0) = std::exp(L(e, 0) - max[(*segment)[e]]);
    sum[(*segment)[e]] += out(e, 0);
  }
  for (int e = 0; e < L.rows; ++e)
    out(e, 0) /= sum[(*segment)[e]];
  return tape.record(std::move(out), {logits},
                     [logits, segment, num_segments](Tape<T> &t, int self) {
                       const auto &A = t.value(Var{self});
                       const auto &G = t.grad(Var{self});
                       auto &gl = t.grad(logits);
                       std::vector<T> dot(num_segments, T{});
                       for (int e = 0; e < A.rows; ++e)
                         dot[(*segment)[e]] += A(e, 0) * G(e, 0);
                       for (int e = 0; e < A.rows; ++e)
                         gl(e, 0) += A(e, 0) * (G(e, 0) - dot[(*segment)[e]]);
                     });
}

/// out[i] = sum over rows e with segment[e] == i of weight[e] * x[e].
template <class T>
Var weighted_scatter_sum(Tape<T> &tape, Var weight, Var x,
                         std::shared_ptr<const std::vector<int>> segment, int num_segments) {
  const auto &W = tape.value(weight);
  const auto &X = tape.value(x);
  Matrix<T> out(num_segments, X.cols);
  for (int e = 0; e < X.rows; ++e) {
    const T w = W(e, 0);
    T *o = out.row((*segment)[e]);
    const T *xr = X.row(e);
    for (int j = 0; j < X.cols; ++j)
      o[j] += w * xr[j];
  }
  return tape.record(std::move(out), {weight, x},
                     [weight, x, segment](Tape<T> &t, int self) {
                       const auto &W = t.value(weight);
                       const auto &X = t.value(x);
                       const auto &G = t.grad(Var{self});
                       T *gw = t.grad_ptr(weight);
                       T *gx = t.grad_ptr(x);
                       for (int e = 0; e < X.rows; ++e) {
                         const T *g = G.row((*segment)[e]);
                         const T *xr = X.row(e);
                         if (gw) {
                           T s{};
                           for (int j = 0; j < X.cols; ++j)
                             s += g[j] * xr[j];
                           gw[e] += s;
                         }
                         if (gx) {
                           T *gxr = gx + static_cast<std::size_t>(e) * X.cols;
                           const T w = W(e, 0);
                           for (int j = 0; j < X.cols; ++j)
                             gxr[j] += w * g[j];
                         }
                       }
                     });
}

/// Mean absolute error over entries where mask != 0; 1x1 output.
template <class T>
Var masked_mae(Tape<T> &tape, Var pred, std::shared_ptr<const Matrix<T>> target,
               std::shared_ptr<const Matrix<T>> mask) {
  const auto &P = tape.value(pred);
  if (P.size() != target->size() || P.size() != mask->size())
    throw ConfigError("masked_mae: shape mismatch");
  T sum{};
  int count = 0;
  for (std::size_t i = 0; i < P.size(); ++i)
    if (mask->data[i] != T{}) {
      sum += std::abs(P.data[i] - target->data[i]);
      ++count;
    }
  if (count == 0)
    throw ValidationError("loss over an empty mask");
  Matrix<T> out(1, 1);
  out.data[0] = sum / count;
  return tape.record(std::move(out), {pred},
                     [pred, target, mask, count](Tape<T> &t, int self) {
                       const T g = t.grad(Var{self}).data[0] / count;
                       const auto &P = t.value(pred);
                       auto &gp = t.grad(pred);
                       for (std::size_t i = 0; i < P.size(); ++i) {
                         if (mask->data[i] == T{})
                           continue;
                         const T d = P.data[i] - target->data[i];
                         gp.data[i] += d > 0 ? g : (d < 0 ? -g : T{});
                       }
                     });
}

/// Row-wise tensor product with per-row (or shared, if `w` has one row)
/// weights.
template <class T>
Var tensor_product(Tape<T> &tape, std::shared_ptr<const TensorProductPlan> plan, Var x,
                   Var y, Var w) {
  const auto &X = tape.value(x);
  const auto &Y = tape.value(y);
  const auto &W = tape.value(w);
  if (X.cols != plan->in1().dim() || Y.cols != plan->in2().dim() ||
      W.cols != plan->weight_count() || X.rows != Y.rows ||
      (W.rows != X.rows && W.rows != 1))
    throw ConfigError("tensor_product: operand shapes do not match the plan");
  Matrix<T> out(X.rows, plan->out().dim());
  const bool shared = W.rows == 1;
  for (int n = 0; n < X.rows; ++n)
    plan->forward(X.row(n), Y.row(n), W.row(shared ? 0 : n), out.row(n));
  return tape.record(std::move(out), {x, y, w}, [plan, x, y, w](Tape<T> &t, int self) {
    const auto &X = t.value(x);
    const auto &Y = t.value(y);
    const auto &W = t.value(w);
    const auto &G = t.grad(Var{self});
    T *gx = t.grad_ptr(x);
    T *gy = t.grad_ptr(y);
    T *gw = t.grad_ptr(w);
    const bool shared = W.rows == 1;
    for (int n = 0; n < X.rows; ++n) {
      const std::size_t wrow = shared ? 0 : n;
      plan->backward(X.row(n), Y.row(n), W.row(static_cast<int>(wrow)), G.row(n),
                     gx ? gx + static_cast<std::size_t>(n) * X.cols : nullptr,
                     gy ? gy + static_cast<std::size_t>(n) * Y.cols : nullptr,
                     gw ? gw + wrow * W.cols : nullptr);
    }
  });
}

template <class T>
Var linear(Tape<T> &tape, std::shared_ptr<const LinearPlan> plan, Var x, Var w, Var b) {
  const auto &X = tape.value(x);
  if (X.cols != plan->in().dim() ||
      static_cast<int>(tape.value(w).size()) != plan->weight_count() ||
      (b.valid() && static_cast<int>(tape.value(b).size()) != plan->bias_count()))
    throw ConfigError("linear: operand shapes do not match " + plan->in().str() +
                      " -> " + plan->out().str());
  Matrix<T> out(X.rows, plan->out().dim());
  plan->forward(X.rows, X.data.data(), tape.value(w).data.data(),
                b.valid() ? tape.value(b).data.data() : nullptr, out.data.data());
  return tape.record(std::move(out), {x, w, b}, [plan, x, w, b](Tape<T> &t, int self) {
    const auto &X = t.value(x);
    plan->backward(X.rows, X.data.data(), t.value(w).data.data(),
                   t.grad(Var{self}).data.data(), t.grad_ptr(x), t.grad_ptr(w),
                   b.valid() ? t.grad_ptr(b) : nullptr);
  });
}

/// Adjoint of an equivariant linear map: rows of `q` (in the plan's output
/// signature) are mapped by W^T into the plan's input signature.
template <class T>
Var linear_adjoint(Tape<T> &tape, std::shared_ptr<const LinearPlan> plan, Var q, Var w) {
  const auto &Q = tape.value(q);
  if (Q.cols != plan->out().dim() ||
      static_cast<int>(tape.value(w).size()) != plan->weight_count())
    throw ConfigError("linear_adjoint: operand shapes do not match " + plan->in().str() +
                      " -> " + plan->out().str());
  Matrix<T> out(Q.rows, plan->in().dim());
  // backward() with only gx requested computes gx += W^T gout; x is unused
  plan->backward(Q.rows, out.data.data(), tape.value(w).data.data(), Q.data.data(),
                 out.data.data(), static_cast<T *>(nullptr), static_cast<T *>(nullptr));
  return tape.record(std::move(out), {q, w}, [plan, q, w](Tape<T> &t, int self) {
    const auto &Q = t.value(q);
    const auto &G = t.grad(Var{self});
    if (t.needs_grad(q)) {
      Matrix<T> tmp(Q.rows, Q.cols);
      plan->forward(Q.rows, G.data.data(), t.value(w).data.data(), static_cast<const T *>(nullptr),
                    tmp.data.data());
      auto &gq = t.grad(q);
      for (std::size_t i = 0; i < tmp.size(); ++i)
        gq.data[i] += tmp.data[i];
    }
    if (t.needs_grad(w))
      plan->backward(Q.rows, G.data.data(), t.value(w).data.data(), Q.data.data(),
                     static_cast<T *>(nullptr), t.grad_ptr(w), static_cast<T *>(nullptr));
  });
}

template <class T>
Var layer_norm(Tape<T> &tape, std::shared_ptr<const LayerNormPlan> plan, Var x, Var gain) {
  const auto &X = tape.value(x);
  if (X.cols != plan->signature().dim() ||
      static_cast<int>(tape.value(gain).size()) != plan->gain_count())
    throw ConfigError("layer_norm: operand shapes do not match the plan");
  Matrix<T> out(X.rows, X.cols);
  plan->forward(X.rows, X.data.data(), tape.value(gain).data.data(), out.data.data());
  return tape.record(std::move(out), {x, gain}, [plan, x, gain](Tape<T> &t, int self) {
    const auto &X = t.value(x);
    plan->backward(X.rows, X.data.data(), t.value(gain).data.data(),
                   t.grad(Var{self}).data.data(), t.grad_ptr(x), t.grad_ptr(gain));
  });
}

template <class T> Var gate(Tape<T> &tape, std::shared_ptr<const GatePlan> plan, Var x) {
  const auto &X = tape.value(x);
  if (X.cols != plan->in().dim())
    throw ConfigError("gate: input width does not match " + plan->in().str());
  Matrix<T> out(X.rows, plan->out().dim());
  plan->forward(X.rows, X.data.data(), out.data.data());
  return tape.record(std::move(out), {x}, [plan, x](Tape<T> &t, int self) {
    const auto &X = t.value(x);
    plan->backward(X.rows, X.data.data(), t.grad(Var{self}).data.data(),
                   t.grad(x).data.data());
  });
}

}  // namespace ops
}  // namespace geqshift
