//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <vector>

#include "geqshift/clebsch_gordan.hpp"
#include "geqshift/geometric_tensor.hpp"
#include "geqshift/geometry.hpp"

namespace geqshift {

/// Square row-major matrix acting on one degree-l block.
struct WignerMatrix {
  int dim = 1;
  std::vector<double> a{1.0};

  double operator()(int i, int j) const { return a[i * dim + j]; }
  double &operator()(int i, int j) { return a[i * dim + j]; }

  WignerMatrix operator*(const WignerMatrix &o) const {
    WignerMatrix r{dim, std::vector<double>(dim * dim, 0.0)};
    for (int i = 0; i < dim; ++i)
      for (int k = 0; k < dim; ++k)
        for (int j = 0; j < dim; ++j)
          r(i, j) += (*this)(i, k) * o(k, j);
    return r;
  }
};

/// Real-basis Wigner D matrix of degree l for a proper rotation.
///
/// Degree 1 is R expressed in the (y, z, x) component order of the real
/// harmonics; higher degrees are obtained by coupling D^{l-1} ⊗ D^1 down to
/// degree l with the (l-1, 1, l) coupling block, which is an isometry onto
/// the degree-l subspace. Only used to test equivariance.
inline WignerMatrix wigner_d(int l, const Mat3 &rotation,
                             const CGTable &table = CGTable::global()) {
  require_proper_rotation(rotation);
  if (l == 0)
    return {};
  static constexpr int axis[3] = {1, 2, 0};
  WignerMatrix d1{3, std::vector<double>(9)};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      d1(i, j) = rotation[axis[i]][axis[j]];
  WignerMatrix d = d1;
  for (int k = 2; k <= l; ++k) {
    const CGBlock &c = table.get(k - 1, 1, k);
    const int dk = 2 * k + 1;
    WignerMatrix next{dk, std::vector<double>(dk * dk, 0.0)};
    // next(p,q) = sum C[a,b,p] D(a,a') D1(b,b') C[a',b',q]
    for (const auto &e1 : c.nonzeros)
      for (const auto &e2 : c.nonzeros)
        next(e1.m3, e2.m3) +=
            e1.value * d(e1.m1, e2.m1) * d1(e1.m2, e2.m2) * e2.value;
    d = std::move(next);
  }
  return d;
}

/// Applies an orthogonal 3x3 matrix (rotation, optionally composed with the
/// inversion when det = -1) to a geometric tensor: each degree-l block is
/// multiplied by D^l(R), and odd blocks flip sign under inversion.
template <class T>
GeometricTensor<T> transform(const GeometricTensor<T> &x, const Mat3 &q,
                             const CGTable &table = CGTable::global()) {
  const bool inversion = determinant(q) < 0.0;
  Mat3 r = q;
  if (inversion)
    for (auto &row : r)
      for (auto &v : row)
        v = -v;
  const auto &sig = x.signature();
  GeometricTensor<T> out(sig);
  std::vector<WignerMatrix> cache(sig.lmax() + 1);
  std::vector<bool> have(sig.lmax() + 1, false);
  for (std::size_t e = 0; e < sig.size(); ++e) {
    const auto &entry = sig[e];
    const int l = entry.ir.l;
    if (!have[l]) {
      cache[l] = wigner_d(l, r, table);
      have[l] = true;
    }
    const double sign =
        (inversion && entry.ir.parity == Parity::odd) ? -1.0 : 1.0;
    for (int u = 0; u < entry.mul; ++u) {
      auto src = x.block(e, u);
      auto dst = out.block(e, u);
      for (int i = 0; i < entry.ir.dim(); ++i) {
        double s = 0.0;
        for (int j = 0; j < entry.ir.dim(); ++j)
          s += cache[l](i, j) * static_cast<double>(src[j]);
        dst[i] = static_cast<T>(sign * s);
      }
    }
  }
  return out;
}

}  // namespace geqshift
