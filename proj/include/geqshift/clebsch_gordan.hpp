//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <numeric>
#include <tuple>
#include <vector>

#include "geqshift/error.hpp"

namespace geqshift {

namespace detail {

// Small exact rational with 128-bit parts; sufficient for l <= 6.
struct Rational {
  __int128 num = 0;
  __int128 den = 1;

  static __int128 gcd(__int128 a, __int128 b) {
    if (a < 0)
      a = -a;
    if (b < 0)
      b = -b;
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    return a;
  }
  void reduce() {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    __int128 g = gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  Rational &operator+=(const Rational &o) {
    num = num * o.den + o.num * den;
    den = den * o.den;
    reduce();
    return *this;
  }
};

inline __int128 factorial(int n) {
  __int128 f = 1;
  for (int i = 2; i <= n; ++i)
    f *= i;
  return f;
}

}  // namespace detail

/// Complex-basis (Condon-Shortley) Clebsch-Gordan coefficient
/// <j1 m1; j2 m2 | J M> from Racah's closed form. The sum and the squared
/// prefactor are accumulated as exact rationals; only the final square root
/// is taken in floating point.
inline double complex_clebsch_gordan(int j1, int m1, int j2, int m2, int J,
                                     int M) {
  if (M != m1 + m2)
    return 0.0;
  if (J < std::abs(j1 - j2) || J > j1 + j2)
    return 0.0;
  if (std::abs(m1) > j1 || std::abs(m2) > j2 || std::abs(M) > J)
    return 0.0;
  using detail::factorial;
  detail::Rational sum;
  const int kmax = std::min({j1 + j2 - J, j1 - m1, j2 + m2});
  const int kmin = std::max({0, j2 - J - m1, j1 - J + m2});
  for (int k = kmin; k <= kmax; ++k) {
    __int128 d = factorial(k) * factorial(j1 + j2 - J - k) *
                 factorial(j1 - m1 - k) * factorial(j2 + m2 - k) *
                 factorial(J - j2 + m1 + k) * factorial(J - j1 - m2 + k);
    sum += detail::Rational{(k % 2 == 0) ? 1 : -1, d};
  }
  if (sum.num == 0)
    return 0.0;
  // squared prefactor
  __int128 pn = static_cast<__int128>(2 * J + 1) * factorial(J + j1 - j2) *
                factorial(J - j1 + j2) * factorial(j1 + j2 - J) *
                factorial(J + M) * factorial(J - M) * factorial(j1 - m1) *
                factorial(j1 + m1) * factorial(j2 - m2) * factorial(j2 + m2);
  __int128 pd = factorial(j1 + j2 + J + 1);
  detail::Rational sq{sum.num * sum.num, sum.den * sum.den};
  sq.reduce();
  detail::Rational p{pn, pd};
  p.reduce();
  // sq * p, reduced crosswise to keep magnitudes small
  __int128 g1 = detail::Rational::gcd(sq.num, p.den);
  __int128 g2 = detail::Rational::gcd(p.num, sq.den);
  __int128 num = (sq.num / g1) * (p.num / g2);
  __int128 den = (sq.den / g2) * (p.den / g1);
  double value = std::sqrt(static_cast<long double>(num) /
                           static_cast<long double>(den));
  return sum.num > 0 ? value : -value;
}

/// Unitary change of basis from complex to real spherical harmonics of
/// degree l: Y_real = U * Y_complex, rows/columns indexed m = -l..l.
/// Real harmonics carry no Condon-Shortley phase, so for l = 1 the real
/// components are proportional to (y, z, x).
inline std::vector<std::complex<double>> real_basis_change(int l) {
  const int d = 2 * l + 1;
  std::vector<std::complex<double>> u(d * d, 0.0);
  const double s = 1.0 / std::sqrt(2.0);
  auto at = [&](int m, int mu) -> std::complex<double> & {
    return u[(m + l) * d + (mu + l)];
  };
  at(0, 0) = 1.0;
  for (int m = 1; m <= l; ++m) {
    double sign = (m % 2 == 0) ? 1.0 : -1.0;
    at(m, m) = sign * s;
    at(m, -m) = s;
    at(-m, -m) = std::complex<double>(0.0, s);
    at(-m, m) = std::complex<double>(0.0, -sign * s);
  }
  return u;
}

/// Real-basis coupling coefficients for one (l1, l2, l3) triple, stored
/// row-major as [m1][m2][m3] with m indices shifted by +l. For every m3 the
/// coefficients over (m1, m2) have unit Euclidean norm, so coupling
/// unit-variance inputs yields unit-variance outputs.
struct CGBlock {
  struct Entry {
    int m1, m2, m3;  // shifted indices (0 .. 2l)
    double value;
  };

  int l1 = 0, l2 = 0, l3 = 0;
  std::vector<double> data;
  std::vector<Entry> nonzeros;

  int d1() const { return 2 * l1 + 1; }
  int d2() const { return 2 * l2 + 1; }
  int d3() const { return 2 * l3 + 1; }
  double operator()(int m1, int m2, int m3) const {
    return data[(m1 * d2() + m2) * d3() + m3];
  }
  bool allowed() const { return !nonzeros.empty(); }

  void rebuild_nonzeros() {
    nonzeros.clear();
    for (int a = 0; a < d1(); ++a)
      for (int b = 0; b < d2(); ++b)
        for (int c = 0; c < d3(); ++c) {
          double v = (*this)(a, b, c);
          if (v != 0.0)
            nonzeros.push_back({a, b, c, v});
        }
  }
};

namespace detail {

inline CGBlock compute_real_cg(int l1, int l2, int l3) {
  CGBlock block;
  block.l1 = l1;
  block.l2 = l2;
  block.l3 = l3;
  const int d1 = 2 * l1 + 1, d2 = 2 * l2 + 1, d3 = 2 * l3 + 1;
  block.data.assign(static_cast<std::size_t>(d1) * d2 * d3, 0.0);
  if (l3 < std::abs(l1 - l2) || l3 > l1 + l2)
    return block;

  auto u1 = real_basis_change(l1);
  auto u2 = real_basis_change(l2);
  auto u3 = real_basis_change(l3);
  std::vector<std::complex<double>> c(block.data.size(), 0.0);
  // c[m1,m2,m3] = sum U3[m3,mu3] conj(U1[m1,mu1]) conj(U2[m2,mu2]) CG(mu)
  for (int mu1 = -l1; mu1 <= l1; ++mu1)
    for (int mu2 = -l2; mu2 <= l2; ++mu2) {
      int mu3 = mu1 + mu2;
      if (std::abs(mu3) > l3)
        continue;
      double cg = complex_clebsch_gordan(l1, mu1, l2, mu2, l3, mu3);
      if (cg == 0.0)
        continue;
      for (int a = 0; a < d1; ++a) {
        auto f1 = std::conj(u1[a * d1 + (mu1 + l1)]);
        if (f1 == 0.0)
          continue;
        for (int b = 0; b < d2; ++b) {
          auto f2 = std::conj(u2[b * d2 + (mu2 + l2)]);
          if (f2 == 0.0)
            continue;
          for (int e = 0; e < d3; ++e) {
            auto f3 = u3[e * d3 + (mu3 + l3)];
            if (f3 == 0.0)
              continue;
            c[(a * d2 + b) * d3 + e] += f1 * f2 * f3 * cg;
          }
        }
      }
    }
  // The transformed coefficients are either purely real or purely imaginary.
  double re = 0.0, im = 0.0;
  for (const auto &z : c) {
    re = std::max(re, std::abs(z.real()));
    im = std::max(im, std::abs(z.imag()));
  }
  const bool use_imag = im > re;
  double sign = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    double v = use_imag ? c[i].imag() : c[i].real();
    if (std::abs(v) < 1e-14)
      v = 0.0;
    // fix the overall sign: first nonzero coefficient is positive
    if (sign == 0.0 && v != 0.0)
      sign = v > 0 ? 1.0 : -1.0;
    block.data[i] = v;
  }
  for (auto &v : block.data)
    v *= sign;
  block.rebuild_nonzeros();
  return block;
}

}  // namespace detail

/// Cache of real-basis coupling blocks for all l1, l2, l3 <= lmax. Built
/// once; read-only afterwards.
class CGTable {
 public:
  static constexpr int default_lmax = 3;

  explicit CGTable(int lmax = default_lmax) : lmax_(lmax) {
    for (int a = 0; a <= lmax; ++a)
      for (int b = 0; b <= lmax; ++b)
        for (int c = 0; c <= lmax; ++c)
          blocks_.emplace(std::make_tuple(a, b, c),
                          detail::compute_real_cg(a, b, c));
  }

  static const CGTable &global() {
    static const CGTable table(default_lmax);
    return table;
  }

  int lmax() const { return lmax_; }

  const CGBlock &get(int l1, int l2, int l3) const {
    auto it = blocks_.find(std::make_tuple(l1, l2, l3));
    if (it == blocks_.end())
      throw ConfigError("Clebsch-Gordan block (" + std::to_string(l1) + "," +
                        std::to_string(l2) + "," + std::to_string(l3) +
                        ") exceeds table bound l <= " + std::to_string(lmax_));
    return it->second;
  }

  /// Copy with one coefficient multiplied by `factor`. Used to check that
  /// the self-check suites detect a corrupted table.
  CGTable perturbed(int l1, int l2, int l3, std::size_t index,
                    double factor) const {
    CGTable copy = *this;
    auto &block = copy.blocks_.at(std::make_tuple(l1, l2, l3));
    block.data.at(index) *= factor;
    block.rebuild_nonzeros();
    return copy;
  }

 private:
  int lmax_;
  std::map<std::tuple<int, int, int>, CGBlock> blocks_;
};

/// Real coupling block from the global table. Triples that violate the
/// selection rule return an all-zero block.
inline const CGBlock &clebsch_gordan(int l1, int l2, int l3) {
  return CGTable::global().get(l1, l2, l3);
}

}  // namespace geqshift
