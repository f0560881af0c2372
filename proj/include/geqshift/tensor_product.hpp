//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "geqshift/clebsch_gordan.hpp"
#include "geqshift/geometric_tensor.hpp"

namespace geqshift {

enum class TensorProductMode {
  // Every (channel of x, channel of y, channel of output) triple of an
  // allowed path carries its own weight.
  fully_connected,
  // Output channels follow the channels of x ("uvu"): each allowed path
  // produces one output entry with x's multiplicity, and weights are
  // indexed [u][v] only.
  channelwise,
};

/// One coupling path: entry `in1` of x with entry `in2` of y into output
/// entry `out`.
struct TensorProductPath {
  int in1 = 0, in2 = 0, out = 0;
  int weight_offset = 0;
  int weight_count = 0;
  double coef = 1.0;  // path normalization
  std::vector<CGBlock::Entry> cg;
};

/// Precomputed wiring of a weighted Clebsch-Gordan tensor product.
///
/// Path enumeration order is: entries of x (outer), entries of y, then
/// output entries (fully connected) or l3 ascending (channelwise). Weights
/// are laid out path after path in that order; within a path the layout is
/// [u][v][w] (fully connected) or [u][v] (channelwise). A path exists iff
/// |l1-l2| <= l3 <= l1+l2 and parity(out) = parity(x) * parity(y).
///
/// Each output entry is divided by sqrt(number of paths feeding it).
class TensorProductPlan {
 public:
  TensorProductPlan() = default;

  /// Fully connected product into an explicit output signature.
  TensorProductPlan(IrrepsSignature in1, IrrepsSignature in2,
                    IrrepsSignature out,
                    const CGTable &table = CGTable::global())
      : in1_(std::move(in1)), in2_(std::move(in2)), out_(std::move(out)),
        mode_(TensorProductMode::fully_connected) {
    std::vector<int> fan(out_.size(), 0);
    for (std::size_t a = 0; a < in1_.size(); ++a)
      for (std::size_t b = 0; b < in2_.size(); ++b)
        for (std::size_t c = 0; c < out_.size(); ++c) {
          const auto &ea = in1_[a], &eb = in2_[b], &ec = out_[c];
          if (!allowed(ea.ir, eb.ir, ec.ir))
            continue;
          TensorProductPath p;
          p.in1 = static_cast<int>(a);
          p.in2 = static_cast<int>(b);
          p.out = static_cast<int>(c);
          p.weight_offset = weight_count_;
          p.weight_count = ea.mul * eb.mul * ec.mul;
          p.cg = table.get(ea.ir.l, eb.ir.l, ec.ir.l).nonzeros;
          weight_count_ += p.weight_count;
          ++fan[c];
          paths_.push_back(std::move(p));
        }
    for (auto &p : paths_)
      p.coef = 1.0 / std::sqrt(static_cast<double>(fan[p.out]));
  }

  /// Channelwise product; the output signature lists one entry per path
  /// whose output irrep type appears in `allowed_types`.
  static TensorProductPlan channelwise(IrrepsSignature in1,
                                       IrrepsSignature in2,
                                       const IrrepsSignature &allowed_types,
                                       const CGTable &table = CGTable::global()) {
    TensorProductPlan plan;
    plan.mode_ = TensorProductMode::channelwise;
    plan.in1_ = std::move(in1);
    plan.in2_ = std::move(in2);
    std::vector<IrrepsEntry> out_entries;
    for (std::size_t a = 0; a < plan.in1_.size(); ++a)
      for (std::size_t b = 0; b < plan.in2_.size(); ++b) {
        const auto &ea = plan.in1_[a], &eb = plan.in2_[b];
        for (int l3 = std::abs(ea.ir.l - eb.ir.l); l3 <= ea.ir.l + eb.ir.l;
             ++l3) {
          Irrep ir{l3, ea.ir.parity * eb.ir.parity};
          if (!allowed_types.has_type(ir))
            continue;
          TensorProductPath p;
          p.in1 = static_cast<int>(a);
          p.in2 = static_cast<int>(b);
          p.out = static_cast<int>(out_entries.size());
          p.weight_offset = plan.weight_count_;
          p.weight_count = ea.mul * eb.mul;
          p.coef = 1.0;
          p.cg = table.get(ea.ir.l, eb.ir.l, l3).nonzeros;
          plan.weight_count_ += p.weight_count;
          out_entries.push_back({ea.mul, ir});
          plan.paths_.push_back(std::move(p));
        }
      }
    if (out_entries.empty())
      throw ConfigError("channelwise tensor product " + plan.in1_.str() +
                        " x " + plan.in2_.str() +
                        " has no path into the allowed types " +
                        allowed_types.str());
    plan.out_ = IrrepsSignature(std::move(out_entries));
    return plan;
  }

  static bool allowed(const Irrep &a, const Irrep &b, const Irrep &c) {
    return c.l >= std::abs(a.l - b.l) && c.l <= a.l + b.l &&
           c.parity == a.parity * b.parity;
  }

  const IrrepsSignature &in1() const { return in1_; }
  const IrrepsSignature &in2() const { return in2_; }
  const IrrepsSignature &out() const { return out_; }
  TensorProductMode mode() const { return mode_; }
  int weight_count() const { return weight_count_; }
  const std::vector<TensorProductPath> &paths() const { return paths_; }

  /// out += x ⊗_w y for one row. `out` must be zeroed by the caller.
  template <class T>
  void forward(const T *x, const T *y, const T *w, T *out) const {
    std::array<T, max_dim> t{};
    for (const auto &p : paths_) {
      const auto &ea = in1_[p.in1], &eb = in2_[p.in2], &ec = out_[p.out];
      const int d1 = ea.ir.dim(), d2 = eb.ir.dim(), d3 = ec.ir.dim();
      const T *xa = x + in1_.offset(p.in1);
      const T *yb = y + in2_.offset(p.in2);
      T *oc = out + out_.offset(p.out);
      const T *wp = w + p.weight_offset;
      const T coef = static_cast<T>(p.coef);
      for (int u = 0; u < ea.mul; ++u)
        for (int v = 0; v < eb.mul; ++v) {
          std::fill_n(t.begin(), d3, T{});
          const T *xu = xa + u * d1;
          const T *yv = yb + v * d2;
          for (const auto &e : p.cg)
            t[e.m3] += static_cast<T>(e.value) * xu[e.m1] * yv[e.m2];
          if (mode_ == TensorProductMode::fully_connected) {
            const T *wuv = wp + (u * eb.mul + v) * ec.mul;
            for (int c = 0; c < ec.mul; ++c) {
              const T s = coef * wuv[c];
              for (int m = 0; m < d3; ++m)
                oc[c * d3 + m] += s * t[m];
            }
          } else {
            const T s = coef * wp[u * eb.mul + v];
            for (int m = 0; m < d3; ++m)
              oc[u * d3 + m] += s * t[m];
          }
        }
    }
  }

  /// Accumulates gradients for one row. Any of gx, gy, gw may be null.
  template <class T>
  void backward(const T *x, const T *y, const T *w, const T *gout, T *gx,
                T *gy, T *gw) const {
    std::array<T, max_dim> t{}, gt{};
    for (const auto &p : paths_) {
      const auto &ea = in1_[p.in1], &eb = in2_[p.in2], &ec = out_[p.out];
      const int d1 = ea.ir.dim(), d2 = eb.ir.dim(), d3 = ec.ir.dim();
      const T *xa = x + in1_.offset(p.in1);
      const T *yb = y + in2_.offset(p.in2);
      const T *go = gout + out_.offset(p.out);
      const T *wp = w + p.weight_offset;
      const T coef = static_cast<T>(p.coef);
      for (int u = 0; u < ea.mul; ++u)
        for (int v = 0; v < eb.mul; ++v) {
          const T *xu = xa + u * d1;
          const T *yv = yb + v * d2;
          std::fill_n(gt.begin(), d3, T{});
          if (gw) {
            std::fill_n(t.begin(), d3, T{});
            for (const auto &e : p.cg)
              t[e.m3] += static_cast<T>(e.value) * xu[e.m1] * yv[e.m2];
          }
          if (mode_ == TensorProductMode::fully_connected) {
            const int base = (u * eb.mul + v) * ec.mul;
            for (int c = 0; c < ec.mul; ++c) {
              const T *goc = go + c * d3;
              T dot{};
              for (int m = 0; m < d3; ++m) {
                gt[m] += coef * wp[base + c] * goc[m];
                dot += t[m] * goc[m];
              }
              if (gw)
                gw[p.weight_offset + base + c] += coef * dot;
            }
          } else {
            const int idx = u * eb.mul + v;
            const T *gou = go + u * d3;
            T dot{};
            for (int m = 0; m < d3; ++m) {
              gt[m] = coef * wp[idx] * gou[m];
              dot += t[m] * gou[m];
            }
            if (gw)
              gw[p.weight_offset + idx] += coef * dot;
          }
          T *gxu = gx ? gx + in1_.offset(p.in1) + u * d1 : nullptr;
          T *gyv = gy ? gy + in2_.offset(p.in2) + v * d2 : nullptr;
          for (const auto &e : p.cg) {
            const T c = static_cast<T>(e.value) * gt[e.m3];
            if (gxu)
              gxu[e.m1] += c * yv[e.m2];
            if (gyv)
              gyv[e.m2] += c * xu[e.m1];
          }
        }
    }
  }

 private:
  static constexpr int max_dim = 7;  // degree <= 3

  IrrepsSignature in1_, in2_, out_;
  TensorProductMode mode_ = TensorProductMode::fully_connected;
  int weight_count_ = 0;
  std::vector<TensorProductPath> paths_;
};

/// Weighted tensor product of two geometric tensors into `out_sig`
/// (fully connected weight layout, see TensorProductPlan).
template <class T>
GeometricTensor<T> tensor_product(const GeometricTensor<T> &x,
                                  const GeometricTensor<T> &y,
                                  std::span<const T> weights,
                                  const IrrepsSignature &out_sig) {
  TensorProductPlan plan(x.signature(), y.signature(), out_sig);
  if (static_cast<int>(weights.size()) != plan.weight_count())
    throw ConfigError("tensor product " + x.signature().str() + " x " +
                      y.signature().str() + " -> " + out_sig.str() +
                      " expects " + std::to_string(plan.weight_count()) +
                      " weights (" + std::to_string(plan.paths().size()) +
                      " paths), got " + std::to_string(weights.size()));
  GeometricTensor<T> out(out_sig);
  plan.forward(x.data().data(), y.data().data(), weights.data(),
               out.data().data());
  return out;
}

}  // namespace geqshift
