//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "geqshift/geometric_tensor.hpp"
#include "geqshift/geometry.hpp"

namespace geqshift {

/// Number of components of spherical harmonics up to lmax.
inline constexpr int sh_dim(int lmax) { return (lmax + 1) * (lmax + 1); }

/// Real spherical harmonics of a unit vector, degrees 0..lmax, written into
/// `out` (length (lmax+1)^2) in the order l = 0, 1, ...; m = -l..l.
///
/// Basis: Y_{l,m} ∝ P_l^|m|(z) * Re((x+iy)^|m|) for m >= 0 and
/// Im((x+iy)^|m|) for m < 0, without the Condon-Shortley phase. Degree 1 is
/// therefore sqrt(3) * (y, z, x). "Component" normalization: each degree-l
/// block has Euclidean norm sqrt(2l+1).
template <class T>
void spherical_harmonics_into(int lmax, const Vec3 &dir, std::span<T> out) {
  const double len = norm(dir);
  if (!(len > 0.0))
    throw DegenerateGeometryError(
        "spherical harmonics of a zero-length direction");
  if (std::abs(len - 1.0) > 1e-9)
    throw ConfigError("spherical harmonics require a unit direction (norm " +
                      std::to_string(len) + ")");
  const double x = dir[0], y = dir[1], z = dir[2];

  // Re/Im((x+iy)^m) for m = 0..lmax
  std::vector<double> a(lmax + 1), b(lmax + 1);
  a[0] = 1.0;
  b[0] = 0.0;
  for (int m = 1; m <= lmax; ++m) {
    a[m] = x * a[m - 1] - y * b[m - 1];
    b[m] = x * b[m - 1] + y * a[m - 1];
  }

  // q[l][m]: associated Legendre polynomial with the sin^m factor removed
  std::vector<std::vector<double>> q(lmax + 1,
                                     std::vector<double>(lmax + 1, 0.0));
  for (int m = 0; m <= lmax; ++m) {
    double qmm = 1.0;
    for (int k = 1; k <= m; ++k)
      qmm *= (2 * k - 1);
    q[m][m] = qmm;
    if (m + 1 <= lmax)
      q[m + 1][m] = (2 * m + 1) * z * qmm;
    for (int l = m + 2; l <= lmax; ++l)
      q[l][m] = ((2 * l - 1) * z * q[l - 1][m] - (l + m - 1) * q[l - 2][m]) /
                (l - m);
  }

  std::size_t idx = 0;
  for (int l = 0; l <= lmax; ++l) {
    for (int m = -l; m <= l; ++m, ++idx) {
      const int am = std::abs(m);
      // sqrt((2l+1) (2 - delta_m0) (l-|m|)! / (l+|m|)!)
      double ratio = 1.0;
      for (int k = l - am + 1; k <= l + am; ++k)
        ratio /= k;
      double n = std::sqrt((2 * l + 1) * (m == 0 ? 1.0 : 2.0) * ratio);
      double angular = m > 0 ? a[am] : (m < 0 ? b[am] : 1.0);
      out[idx] = static_cast<T>(n * q[l][am] * angular);
    }
  }
}

/// Spherical harmonics as a geometric tensor with signature
/// 1x0e+1x1o+...+1x(lmax)(parity (-1)^l).
template <class T>
GeometricTensor<T> real_spherical_harmonics(int lmax, const Vec3 &dir) {
  GeometricTensor<T> out(sh_signature(lmax));
  spherical_harmonics_into<T>(lmax, dir, out.data());
  return out;
}

}  // namespace geqshift
