//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

// Slow, independent reference values used by selfcheck and the tests. Nothing
// here shares code with clebsch_gordan.hpp or spherical_harmonics.hpp.

#include <cmath>
#include <complex>
#include <vector>

#include "geqshift/geometry.hpp"

namespace geqshift::reference {

/// Dense [2j1+1][2j2+1][2J+1] array indexed by m + j.
struct Array3 {
  int d1 = 0, d2 = 0, d3 = 0;
  std::vector<std::complex<double>> v;
  Array3(int a, int b, int c) : d1(a), d2(b), d3(c), v(static_cast<std::size_t>(a) * b * c) {}
  std::complex<double> &operator()(int i, int j, int k) { return v[(i * d2 + j) * d3 + k]; }
  const std::complex<double> &operator()(int i, int j, int k) const {
    return v[(i * d2 + j) * d3 + k];
  }
};

inline double ladder(int j, int m, int step) {
  // |<j, m+step| J_step |j, m>| for step = +1 (raising) or -1 (lowering)
  return std::sqrt(static_cast<double>(j * (j + 1) - m * (m + step)));
}

/// Condon-Shortley Clebsch-Gordan coefficients <j1 m1 j2 m2 | J M> from the
/// highest-weight state (fixed by J+ |J J> = 0 and <j1 j1 j2 J-j1|J J> > 0)
/// and repeated application of J- = J1- + J2-.
inline Array3 clebsch_gordan_lowering(int j1, int j2, int J) {
  Array3 c(2 * j1 + 1, 2 * j2 + 1, 2 * J + 1);
  if (J < std::abs(j1 - j2) || J > j1 + j2)
    return c;
  // highest weight: m1 + m2 = J; m1 = j1 is always reachable (J >= j1 - j2)
  // and carries the positive coefficient
  const int m1_min = std::max(-j1, J - j2);
  std::vector<double> hw(2 * j1 + 1, 0.0);
  hw[2 * j1] = 1.0;
  for (int m1 = j1 - 1; m1 >= m1_min; --m1) {
    // 0 = c(m1) A+(j1,m1) + c(m1+1) A+(j2, J-m1-1)
    const int m2 = J - m1 - 1;
    hw[m1 + j1] = -hw[m1 + 1 + j1] * ladder(j2, m2, +1) / ladder(j1, m1, +1);
  }
  double norm = 0.0;
  for (double x : hw)
    norm += x * x;
  norm = std::sqrt(norm);
  for (int m1 = m1_min; m1 <= j1; ++m1)
    c(m1 + j1, J - m1 + j2, 2 * J) = hw[m1 + j1] / norm;

  for (int M = J; M > -J; --M) {
    const double a = ladder(J, M, -1);
    for (int m1 = -j1; m1 <= j1; ++m1) {
      const int m2 = M - 1 - m1;
      if (m2 < -j2 || m2 > j2)
        continue;
      std::complex<double> s = 0.0;
      if (m1 + 1 <= j1)
        s += c(m1 + 1 + j1, m2 + j2, M + J) * ladder(j1, m1 + 1, -1);
      if (m2 + 1 <= j2)
        s += c(m1 + j1, m2 + 1 + j2, M + J) * ladder(j2, m2 + 1, -1);
      c(m1 + j1, m2 + j2, M - 1 + J) = s / a;
    }
  }
  return c;
}

/// Row m (index m + l) of the map from complex (Condon-Shortley) spherical
/// harmonics to real ones without the (-1)^m phase, ordered m = -l..l.
inline std::vector<std::vector<std::complex<double>>> complex_to_real(int l) {
  const double s = 1.0 / std::sqrt(2.0);
  const std::complex<double> i(0.0, 1.0);
  std::vector<std::vector<std::complex<double>>> u(2 * l + 1,
                                                   std::vector<std::complex<double>>(2 * l + 1));
  u[l][l] = 1.0;
  for (int m = 1; m <= l; ++m) {
    const double phase = (m % 2 == 0) ? 1.0 : -1.0;
    // cos-type: ((-1)^m Y^m + Y^-m) / sqrt2
    u[l + m][l + m] = phase * s;
    u[l + m][l - m] = s;
    // sin-type: i (Y^-m - (-1)^m Y^m) / sqrt2
    u[l - m][l - m] = i * s;
    u[l - m][l + m] = -i * phase * s;
  }
  return u;
}

/// Real-basis coupling coefficients C[m1][m2][m3] built from the lowering
/// recurrence. The result is made real, each m3 slice is scaled to unit
/// norm, and the overall sign makes the first nonzero entry positive.
inline std::vector<double> real_clebsch_gordan(int l1, int l2, int l3) {
  const int d1 = 2 * l1 + 1, d2 = 2 * l2 + 1, d3 = 2 * l3 + 1;
  std::vector<double> out(static_cast<std::size_t>(d1) * d2 * d3, 0.0);
  if (l3 < std::abs(l1 - l2) || l3 > l1 + l2)
    return out;
  auto cg = clebsch_gordan_lowering(l1, l2, l3);
  auto u1 = complex_to_real(l1), u2 = complex_to_real(l2), u3 = complex_to_real(l3);
  std::vector<std::complex<double>> c(out.size());
  for (int a = 0; a < d1; ++a)
    for (int b = 0; b < d2; ++b)
      for (int k = 0; k < d3; ++k) {
        std::complex<double> s = 0.0;
        for (int p = 0; p < d1; ++p)
          for (int q = 0; q < d2; ++q)
            for (int r = 0; r < d3; ++r)
              s += u3[k][r] * std::conj(u1[a][p]) * std::conj(u2[b][q]) * cg(p, q, r);
        c[(a * d2 + b) * d3 + k] = s;
      }
  double re = 0.0, im = 0.0;
  for (auto z : c) {
    re += z.real() * z.real();
    im += z.imag() * z.imag();
  }
  for (std::size_t i = 0; i < c.size(); ++i)
    out[i] = re >= im ? c[i].real() : c[i].imag();
  for (int k = 0; k < d3; ++k) {
    double n = 0.0;
    for (int a = 0; a < d1; ++a)
      for (int b = 0; b < d2; ++b)
        n += out[(a * d2 + b) * d3 + k] * out[(a * d2 + b) * d3 + k];
    n = std::sqrt(n);
    if (n > 0)
      for (int a = 0; a < d1; ++a)
        for (int b = 0; b < d2; ++b)
          out[(a * d2 + b) * d3 + k] /= n;
  }
  for (double x : out)
    if (std::abs(x) > 1e-12) {
      if (x < 0)
        for (double &y : out)
          y = -y;
      break;
    }
  return out;
}

/// Explicit real solid harmonics of degree l <= 3 at a unit vector, ordered
/// m = -l..l, normalized so that the block has norm sqrt(2l+1).
inline std::vector<double> solid_harmonics(int l, const Vec3 &r) {
  const double x = r[0], y = r[1], z = r[2];
  switch (l) {
  case 0:
    return {1.0};
  case 1:
    return {std::sqrt(3.0) * y, std::sqrt(3.0) * z, std::sqrt(3.0) * x};
  case 2: {
    const double s15 = std::sqrt(15.0);
    return {s15 * x * y, s15 * y * z, std::sqrt(5.0) / 2.0 * (2 * z * z - x * x - y * y),
            s15 * x * z, s15 / 2.0 * (x * x - y * y)};
  }
  case 3: {
    const double a = std::sqrt(35.0 / 8.0), b = std::sqrt(105.0), c = std::sqrt(21.0 / 8.0);
    const double rho = 4 * z * z - x * x - y * y;
    return {a * y * (3 * x * x - y * y),
            b * x * y * z,
            c * y * rho,
            std::sqrt(7.0) / 2.0 * z * (2 * z * z - 3 * x * x - 3 * y * y),
            c * x * rho,
            b / 2.0 * z * (x * x - y * y),
            a * x * (x * x - 3 * y * y)};
  }
  default:
    return {};
  }
}

}  // namespace geqshift::reference
