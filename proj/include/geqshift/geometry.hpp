//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "geqshift/error.hpp"

namespace geqshift {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

inline Vec3 operator-(const Vec3 &a, const Vec3 &b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Vec3 operator+(const Vec3 &a, const Vec3 &b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Vec3 operator*(double s, const Vec3 &a) {
  return {s * a[0], s * a[1], s * a[2]};
}
inline double dot(const Vec3 &a, const Vec3 &b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm(const Vec3 &a) { return std::sqrt(dot(a, a)); }

inline Vec3 operator*(const Mat3 &m, const Vec3 &v) {
  Vec3 r{};
  for (int i = 0; i < 3; ++i)
    r[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
  return r;
}

inline Mat3 operator*(const Mat3 &a, const Mat3 &b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        r[i][j] += a[i][k] * b[k][j];
  return r;
}

inline Mat3 identity3() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

inline double determinant(const Mat3 &m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

/// Max deviation of R^T R from the identity.
inline double orthogonality_error(const Mat3 &m) {
  double err = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k)
        s += m[k][i] * m[k][j];
      err = std::max(err, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  return err;
}

inline void require_proper_rotation(const Mat3 &r, double tol = 1e-9) {
  if (orthogonality_error(r) > tol)
    throw InvalidRotationError("matrix is not orthogonal");
  if (std::abs(determinant(r) - 1.0) > tol)
    throw InvalidRotationError("matrix is not a proper rotation (det != +1)");
}

inline Mat3 rotation_z(double angle) {
  double c = std::cos(angle), s = std::sin(angle);
  return {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
}

inline Mat3 rotation_from_quaternion(double w, double x, double y, double z) {
  double n = std::sqrt(w * w + x * x + y * y + z * z);
  w /= n;
  x /= n;
  y /= n;
  z /= n;
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x),
            1 - 2 * (x * x + y * y)}}};
}

/// Uniformly distributed proper rotation (normalized Gaussian quaternion).
template <class Rng> Mat3 random_rotation(Rng &rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return rotation_from_quaternion(n(rng), n(rng), n(rng), n(rng));
}

template <class Rng> Vec3 random_unit_vector(Rng &rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  while (true) {
    Vec3 v{n(rng), n(rng), n(rng)};
    double len = norm(v);
    if (len > 1e-6)
      return (1.0 / len) * v;
  }
}

}  // namespace geqshift
