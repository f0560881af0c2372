//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "geqshift/geometric_tensor.hpp"

namespace geqshift {

/// Equivariant linear map: channels are mixed only among blocks of the same
/// (l, parity) type. Scalar (0e) outputs may carry a bias.
///
/// Weight layout: for each output entry in order, a row-major
/// [fan_in x mul_out] matrix, where fan_in counts all input channels of the
/// entry's type (in input order). Bias layout: one value per 0e output
/// channel, in output order.
class LinearPlan {
 public:
  struct Source {
    int entry;    // input entry
    int row_base; // first weight row for this entry's channels
  };
  struct Block {
    int out_entry;
    int fan_in;
    int weight_offset;
    int bias_offset;  // -1 if no bias
    std::vector<Source> sources;
  };

  LinearPlan() = default;
  LinearPlan(IrrepsSignature in, IrrepsSignature out, bool bias = false)
      : in_(std::move(in)), out_(std::move(out)) {
    for (std::size_t o = 0; o < out_.size(); ++o) {
      const auto &eo = out_[o];
      Block b;
      b.out_entry = static_cast<int>(o);
      b.fan_in = 0;
      for (std::size_t i = 0; i < in_.size(); ++i)
        if (in_[i].ir == eo.ir) {
          b.sources.push_back({static_cast<int>(i), b.fan_in});
          b.fan_in += in_[i].mul;
        }
      if (b.fan_in == 0)
        throw ConfigError("linear map " + in_.str() + " -> " + out_.str() +
                          ": output type " + eo.ir.str() +
                          " is absent from the input");
      b.weight_offset = weight_count_;
      weight_count_ += b.fan_in * eo.mul;
      b.bias_offset = -1;
      if (bias && eo.ir.is_scalar()) {
        b.bias_offset = bias_count_;
        bias_count_ += eo.mul;
      }
      blocks_.push_back(std::move(b));
    }
  }

  const IrrepsSignature &in() const { return in_; }
  const IrrepsSignature &out() const { return out_; }
  int weight_count() const { return weight_count_; }
  int bias_count() const { return bias_count_; }
  const std::vector<Block> &blocks() const { return blocks_; }

  /// out = W x (+ b) for `rows` rows; out is overwritten.
  template <class T>
  void forward(int rows, const T *x, const T *w, const T *bias, T *out) const {
    const int din = in_.dim(), dout = out_.dim();
    std::fill(out, out + static_cast<std::size_t>(rows) * dout, T{});
    for (int n = 0; n < rows; ++n) {
      const T *xn = x + static_cast<std::size_t>(n) * din;
      T *on = out + static_cast<std::size_t>(n) * dout;
      for (const auto &b : blocks_) {
        const auto &eo = out_[b.out_entry];
        const int d = eo.ir.dim();
        T *ob = on + out_.offset(b.out_entry);
        const T *wb = w + b.weight_offset;
        for (const auto &s : b.sources) {
          const auto &ei = in_[s.entry];
          const T *xi = xn + in_.offset(s.entry);
          for (int u = 0; u < ei.mul; ++u) {
            const T *wrow = wb + (s.row_base + u) * eo.mul;
            const T *xu = xi + u * d;
            for (int c = 0; c < eo.mul; ++c) {
              const T wv = wrow[c];
              T *oc = ob + c * d;
              for (int m = 0; m < d; ++m)
                oc[m] += wv * xu[m];
            }
          }
        }
        if (bias && b.bias_offset >= 0)
          for (int c = 0; c < eo.mul; ++c)
            ob[c] += bias[b.bias_offset + c];
      }
    }
  }

  /// Accumulates gradients; gx, gw, gb may be null.
  template <class T>
  void backward(int rows, const T *x, const T *w, const T *gout, T *gx, T *gw,
                T *gb) const {
    const int din = in_.dim(), dout = out_.dim();
    for (int n = 0; n < rows; ++n) {
      const T *xn = x + static_cast<std::size_t>(n) * din;
      const T *gn = gout + static_cast<std::size_t>(n) * dout;
      T *gxn = gx ? gx + static_cast<std::size_t>(n) * din : nullptr;
      for (const auto &b : blocks_) {
        const auto &eo = out_[b.out_entry];
        const int d = eo.ir.dim();
        const T *gob = gn + out_.offset(b.out_entry);
        const T *wb = w + b.weight_offset;
        for (const auto &s : b.sources) {
          const auto &ei = in_[s.entry];
          const T *xi = xn + in_.offset(s.entry);
          T *gxi = gxn ? gxn + in_.offset(s.entry) : nullptr;
          for (int u = 0; u < ei.mul; ++u) {
            const int row = s.row_base + u;
            const T *xu = xi + u * d;
            for (int c = 0; c < eo.mul; ++c) {
              const T *goc = gob + c * d;
              if (gw) {
                T dot{};
                for (int m = 0; m < d; ++m)
                  dot += goc[m] * xu[m];
                gw[b.weight_offset + row * eo.mul + c] += dot;
              }
              if (gxi) {
                const T wv = wb[row * eo.mul + c];
                for (int m = 0; m < d; ++m)
                  gxi[u * d + m] += wv * goc[m];
              }
            }
          }
        }
        if (gb && b.bias_offset >= 0)
          for (int c = 0; c < eo.mul; ++c)
            gb[b.bias_offset + c] += gob[c];
      }
    }
  }

 private:
  IrrepsSignature in_, out_;
  int weight_count_ = 0;
  int bias_count_ = 0;
  std::vector<Block> blocks_;
};

/// Equivariant layer normalization, applied per irrep type:
///  - 0e channels are mean-centered, then divided by the RMS over channels;
///  - every other type is divided by the RMS of its channels' block norms.
/// A learnable gain per channel follows (channel order = signature order).
class LayerNormPlan {
 public:
  struct Group {
    Irrep ir;
    std::vector<int> channel_offsets;  // start index of each channel block
    std::vector<int> gain_index;       // matching gain slot
  };

  LayerNormPlan() = default;
  explicit LayerNormPlan(IrrepsSignature sig, double eps = 1e-5)
      : sig_(std::move(sig)), eps_(eps) {
    if (!(eps > 0))
      throw ConfigError("layer norm eps must be positive");
    std::map<Irrep, int> index;
    int gain = 0;
    for (std::size_t e = 0; e < sig_.size(); ++e) {
      const auto &entry = sig_[e];
      auto [it, inserted] =
          index.emplace(entry.ir, static_cast<int>(groups_.size()));
      if (inserted)
        groups_.push_back({entry.ir, {}, {}});
      auto &g = groups_[it->second];
      for (int u = 0; u < entry.mul; ++u) {
        g.channel_offsets.push_back(sig_.offset(e) + u * entry.ir.dim());
        g.gain_index.push_back(gain++);
      }
    }
  }

  const IrrepsSignature &signature() const { return sig_; }
  double eps() const { return eps_; }
  int gain_count() const { return sig_.num_channels(); }

  template <class T>
  void forward(int rows, const T *x, const T *gain, T *out) const {
    const int dim = sig_.dim();
    const T eps = static_cast<T>(eps_);
    for (int n = 0; n < rows; ++n) {
      const T *xn = x + static_cast<std::size_t>(n) * dim;
      T *on = out + static_cast<std::size_t>(n) * dim;
      for (const auto &g : groups_) {
        const int d = g.ir.dim();
        const int c = static_cast<int>(g.channel_offsets.size());
        if (g.ir.is_scalar()) {
          T mean{};
          for (int k = 0; k < c; ++k)
            mean += xn[g.channel_offsets[k]];
          mean /= c;
          T var{};
          for (int k = 0; k < c; ++k) {
            T v = xn[g.channel_offsets[k]] - mean;
            var += v * v;
          }
          var /= c;
          const T s = T(1) / std::sqrt(var + eps);
          for (int k = 0; k < c; ++k) {
            const int o = g.channel_offsets[k];
            on[o] = gain[g.gain_index[k]] * (xn[o] - mean) * s;
          }
        } else {
          T sq{};
          for (int k = 0; k < c; ++k)
            for (int m = 0; m < d; ++m) {
              T v = xn[g.channel_offsets[k] + m];
              sq += v * v;
            }
          sq /= c;
          const T s = T(1) / std::sqrt(sq + eps);
          for (int k = 0; k < c; ++k) {
            const int o = g.channel_offsets[k];
            const T f = gain[g.gain_index[k]] * s;
            for (int m = 0; m < d; ++m)
              on[o + m] = f * xn[o + m];
          }
        }
      }
    }
  }

  template <class T>
  void backward(int rows, const T *x, const T *gain, const T *gout, T *gx,
                T *ggain) const {
    const int dim = sig_.dim();
    const T eps = static_cast<T>(eps_);
    std::vector<T> xc, dxhat;
    for (int n = 0; n < rows; ++n) {
      const T *xn = x + static_cast<std::size_t>(n) * dim;
      const T *gn = gout + static_cast<std::size_t>(n) * dim;
      T *gxn = gx ? gx + static_cast<std::size_t>(n) * dim : nullptr;
      for (const auto &g : groups_) {
        const int d = g.ir.dim();
        const int c = static_cast<int>(g.channel_offsets.size());
        if (g.ir.is_scalar()) {
          xc.assign(c, T{});
          dxhat.assign(c, T{});
          T mean{};
          for (int k = 0; k < c; ++k)
            mean += xn[g.channel_offsets[k]];
          mean /= c;
          T var{};
          for (int k = 0; k < c; ++k) {
            xc[k] = xn[g.channel_offsets[k]] - mean;
            var += xc[k] * xc[k];
          }
          var /= c;
          const T s = T(1) / std::sqrt(var + eps);
          T proj{};
          for (int k = 0; k < c; ++k) {
            const T go = gn[g.channel_offsets[k]];
            if (ggain)
              ggain[g.gain_index[k]] += go * xc[k] * s;
            dxhat[k] = gain[g.gain_index[k]] * go;
            proj += dxhat[k] * xc[k];
          }
          if (!gxn)
            continue;
          // d/dxc = s*dxhat - s^3 xc <dxhat, xc> / c, then remove the mean
          T mean_g{};
          for (int k = 0; k < c; ++k) {
            dxhat[k] = s * dxhat[k] - s * s * s * xc[k] * proj / c;
            mean_g += dxhat[k];
          }
          mean_g /= c;
          for (int k = 0; k < c; ++k)
            gxn[g.channel_offsets[k]] += dxhat[k] - mean_g;
        } else {
          T sq{};
          for (int k = 0; k < c; ++k)
            for (int m = 0; m < d; ++m) {
              T v = xn[g.channel_offsets[k] + m];
              sq += v * v;
            }
          sq /= c;
          const T s = T(1) / std::sqrt(sq + eps);
          T proj{};
          for (int k = 0; k < c; ++k) {
            const int o = g.channel_offsets[k];
            T dot{};
            for (int m = 0; m < d; ++m)
              dot += gn[o + m] * xn[o + m];
            if (ggain)
              ggain[g.gain_index[k]] += dot * s;
            proj += gain[g.gain_index[k]] * dot;
          }
          if (!gxn)
            continue;
          for (int k = 0; k < c; ++k) {
            const int o = g.channel_offsets[k];
            const T f = gain[g.gain_index[k]] * s;
            for (int m = 0; m < d; ++m)
              gxn[o + m] += f * gn[o + m] - s * s * s * xn[o + m] * proj / c;
          }
        }
      }
    }
  }

 private:
  IrrepsSignature sig_;
  double eps_ = 1e-5;
  std::vector<Group> groups_;
};

/// Gated nonlinearity. The input signature starts with 0e entries holding
/// S ordinary scalars followed by G gate scalars, then the gated (non-0e)
/// entries with G channels in total. Ordinary scalars pass through SiLU;
/// gated channel k is multiplied by sigmoid(gate k). The output signature is
/// S x 0e followed by the gated entries.
class GatePlan {
 public:
  GatePlan() = default;
  explicit GatePlan(IrrepsSignature in) : in_(std::move(in)) {
    std::size_t e = 0;
    int leading = 0;
    while (e < in_.size() && in_[e].ir.is_scalar())
      leading += in_[e++].mul;
    std::vector<IrrepsEntry> gated;
    gated_begin_ = e;
    for (; e < in_.size(); ++e) {
      if (in_[e].ir.is_scalar())
        throw ConfigError("gate input " + in_.str() +
                          ": scalar entries must precede gated entries");
      gated.push_back(in_[e]);
      gates_ += in_[e].mul;
    }
    scalars_ = leading - gates_;
    if (scalars_ < 0)
      throw ConfigError("gate input " + in_.str() + " provides " +
                        std::to_string(leading) + " scalars but " +
                        std::to_string(gates_) + " gates are required");
    std::vector<IrrepsEntry> out;
    if (scalars_ > 0)
      out.push_back({scalars_, {0, Parity::even}});
    out.insert(out.end(), gated.begin(), gated.end());
    out_ = IrrepsSignature(std::move(out));
  }

  /// Input signature needed to produce `out` (scalars, then gates, then
  /// gated entries).
  static IrrepsSignature input_for(const IrrepsSignature &out) {
    int scalars = 0, gates = 0;
    std::vector<IrrepsEntry> gated;
    for (const auto &e : out.entries()) {
      if (e.ir.is_scalar())
        scalars += e.mul;
      else {
        gated.push_back(e);
        gates += e.mul;
      }
    }
    std::vector<IrrepsEntry> in;
    if (scalars > 0)
      in.push_back({scalars, {0, Parity::even}});
    if (gates > 0)
      in.push_back({gates, {0, Parity::even}});
    in.insert(in.end(), gated.begin(), gated.end());
    return IrrepsSignature(std::move(in));
  }

  const IrrepsSignature &in() const { return in_; }
  const IrrepsSignature &out() const { return out_; }
  int scalars() const { return scalars_; }
  int gates() const { return gates_; }

  template <class T> static T sigmoid(T v) { return T(1) / (T(1) + std::exp(-v)); }

  template <class T> void forward(int rows, const T *x, T *out) const {
    const int din = in_.dim(), dout = out_.dim();
    const int gated_in = in_.offset(gated_begin_);
    for (int n = 0; n < rows; ++n) {
      const T *xn = x + static_cast<std::size_t>(n) * din;
      T *on = out + static_cast<std::size_t>(n) * dout;
      for (int k = 0; k < scalars_; ++k)
        on[k] = xn[k] * sigmoid(xn[k]);
      int gate = scalars_;
      int src = gated_in, dst = scalars_;
      for (std::size_t e = gated_begin_; e < in_.size(); ++e) {
        const int d = in_[e].ir.dim();
        for (int u = 0; u < in_[e].mul; ++u, ++gate) {
          const T s = sigmoid(xn[gate]);
          for (int m = 0; m < d; ++m)
            on[dst++] = s * xn[src++];
        }
      }
    }
  }

  template <class T>
  void backward(int rows, const T *x, const T *gout, T *gx) const {
    const int din = in_.dim(), dout = out_.dim();
    const int gated_in = in_.offset(gated_begin_);
    for (int n = 0; n < rows; ++n) {
      const T *xn = x + static_cast<std::size_t>(n) * din;
      const T *gn = gout + static_cast<std::size_t>(n) * dout;
      T *gxn = gx + static_cast<std::size_t>(n) * din;
      for (int k = 0; k < scalars_; ++k) {
        const T s = sigmoid(xn[k]);
        gxn[k] += gn[k] * (s + xn[k] * s * (T(1) - s));
      }
      int gate = scalars_;
      int src = gated_in, dst = scalars_;
      for (std::size_t e = gated_begin_; e < in_.size(); ++e) {
        const int d = in_[e].ir.dim();
        for (int u = 0; u < in_[e].mul; ++u, ++gate) {
          const T s = sigmoid(xn[gate]);
          T dot{};
          for (int m = 0; m < d; ++m, ++src, ++dst) {
            gxn[src] += s * gn[dst];
            dot += gn[dst] * xn[src];
          }
          gxn[gate] += dot * s * (T(1) - s);
        }
      }
    }
  }

 private:
  IrrepsSignature in_, out_;
  std::size_t gated_begin_ = 0;
  int scalars_ = 0;
  int gates_ = 0;
};

// Single-tensor entry points.

template <class T>
GeometricTensor<T> linear(const GeometricTensor<T> &x,
                          std::span<const T> weights,
                          const IrrepsSignature &out_sig,
                          std::span<const T> bias = {}) {
  LinearPlan plan(x.signature(), out_sig, !bias.empty());
  if (static_cast<int>(weights.size()) != plan.weight_count())
    throw ConfigError("linear map " + x.signature().str() + " -> " +
                      out_sig.str() + " expects " +
                      std::to_string(plan.weight_count()) + " weights, got " +
                      std::to_string(weights.size()));
  if (!bias.empty() && static_cast<int>(bias.size()) != plan.bias_count())
    throw ConfigError("linear map expects " +
                      std::to_string(plan.bias_count()) + " bias values");
  GeometricTensor<T> out(out_sig);
  plan.forward(1, x.data().data(), weights.data(),
               bias.empty() ? nullptr : bias.data(), out.data().data());
  return out;
}

template <class T>
GeometricTensor<T> equivariant_layer_norm(const GeometricTensor<T> &x,
                                          std::span<const T> gains,
                                          double eps = 1e-5) {
  LayerNormPlan plan(x.signature(), eps);
  if (static_cast<int>(gains.size()) != plan.gain_count())
    throw ConfigError("layer norm over " + x.signature().str() + " expects " +
                      std::to_string(plan.gain_count()) + " gains");
  GeometricTensor<T> out(x.signature());
  plan.forward(1, x.data().data(), gains.data(), out.data().data());
  return out;
}

template <class T>
GeometricTensor<T> gated_activation(const GeometricTensor<T> &x) {
  GatePlan plan(x.signature());
  GeometricTensor<T> out(plan.out());
  plan.forward(1, x.data().data(), out.data().data());
  return out;
}

}  // namespace geqshift
