//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace geqshift;
using gqtest::max_abs_diff;

TEST(ClebschGordan, ComplexTableValues) {
  // textbook values
  EXPECT_NEAR(complex_clebsch_gordan(1, 0, 1, 0, 2, 0), std::sqrt(2.0 / 3.0), 1e-15);
  EXPECT_NEAR(complex_clebsch_gordan(1, 1, 1, -1, 0, 0), 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(complex_clebsch_gordan(1, 0, 1, 0, 0, 0), -1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(complex_clebsch_gordan(1, 1, 1, -1, 1, 0), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(ClebschGordan, ComplexMatchesLoweringOracle) {
  for (int a = 0; a <= 3; ++a)
    for (int b = 0; b <= 3; ++b)
      for (int J = std::abs(a - b); J <= a + b; ++J) {
        auto ref = reference::clebsch_gordan_lowering(a, b, J);
        for (int m1 = -a; m1 <= a; ++m1)
          for (int m2 = -b; m2 <= b; ++m2)
            for (int M = -J; M <= J; ++M)
              EXPECT_NEAR(complex_clebsch_gordan(a, m1, b, m2, J, M),
                          ref(m1 + a, m2 + b, M + J).real(), 1e-12);
      }
}

TEST(ClebschGordan, RealTableMatchesOracle) {
  for (int a = 0; a <= 3; ++a)
    for (int b = 0; b <= 3; ++b)
      for (int c = 0; c <= 3; ++c)
        EXPECT_LE(max_abs_diff(reference::real_clebsch_gordan(a, b, c), clebsch_gordan(a, b, c).data), 1e-12)
            << a << b << c;
}

TEST(ClebschGordan, SelectionRule) {
  for (int a = 0; a <= 3; ++a)
    for (int b = 0; b <= 3; ++b)
      for (int c = 0; c <= 3; ++c) {
        const auto &blk = clebsch_gordan(a, b, c);
        const bool allowed = c >= std::abs(a - b) && c <= a + b;
        EXPECT_EQ(blk.allowed(), allowed);
        if (!allowed)
          for (double v : blk.data)
            EXPECT_EQ(v, 0.0);
      }
}

TEST(ClebschGordan, SlicesOrthonormal) {
  for (int a = 0; a <= 3; ++a)
    for (int b = 0; b <= 3; ++b)
      for (int c = std::abs(a - b); c <= std::min(3, a + b); ++c) {
        const auto &blk = clebsch_gordan(a, b, c);
        for (int p = 0; p < blk.d3(); ++p)
          for (int q = 0; q < blk.d3(); ++q) {
            double s = 0.0;
            for (int i = 0; i < blk.d1(); ++i)
              for (int j = 0; j < blk.d2(); ++j)
                s += blk(i, j, p) * blk(i, j, q);
            EXPECT_NEAR(s, p == q ? 1.0 : 0.0, 1e-13);
          }
      }
}

TEST(ClebschGordan, IntertwinesWignerMatrices) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const Mat3 r = random_rotation(rng);
    for (int a = 0; a <= 2; ++a)
      for (int b = 0; b <= 2; ++b)
        for (int c = std::abs(a - b); c <= std::min(3, a + b); ++c) {
          const auto &C = clebsch_gordan(a, b, c);
          auto da = wigner_d(a, r), db = wigner_d(b, r), dc = wigner_d(c, r);
          // sum_ij C[i,j,k] Da[i,i'] Db[j,j'] == sum_k' Dc[k,k'] C[i',j',k']
          for (int i2 = 0; i2 < C.d1(); ++i2)
            for (int j2 = 0; j2 < C.d2(); ++j2)
              for (int k = 0; k < C.d3(); ++k) {
                double lhs = 0.0, rhs = 0.0;
                for (int i = 0; i < C.d1(); ++i)
                  for (int j = 0; j < C.d2(); ++j)
                    lhs += C(i, j, k) * da(i, i2) * db(j, j2);
                for (int k2 = 0; k2 < C.d3(); ++k2)
                  rhs += dc(k, k2) * C(i2, j2, k2);
                EXPECT_NEAR(lhs, rhs, 1e-12);
              }
        }
  }
}

TEST(ClebschGordan, VectorCouplingsAreDotAndCross) {
  // real degree-1 order is (y, z, x): x-hat = index 2, y-hat = 0, z-hat = 1
  const auto &c0 = clebsch_gordan(1, 1, 0);
  const auto &c1 = clebsch_gordan(1, 1, 1);
  EXPECT_NEAR(std::abs(c0(2, 2, 0)), 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_EQ(c0(2, 0, 0), 0.0);
  // x-hat with y-hat couples only into the z component
  EXPECT_NEAR(std::abs(c1(2, 0, 1)), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(c1(2, 0, 0), 0.0);
  EXPECT_EQ(c1(2, 0, 2), 0.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        EXPECT_NEAR(c1(i, j, k), -c1(j, i, k), 1e-15);
  EXPECT_TRUE(check_cg_vector_products(CGTable::global()).pass());
}

TEST(ClebschGordan, ScalarCouplingIsIdentity) {
  for (int l = 0; l <= 3; ++l) {
    const auto &c = clebsch_gordan(0, l, l);
    for (int j = 0; j < 2 * l + 1; ++j)
      for (int k = 0; k < 2 * l + 1; ++k)
        EXPECT_NEAR(c(0, j, k), j == k ? 1.0 : 0.0, 1e-14);
  }
}

TEST(ClebschGordan, TableBoundIsEnforced) {
  EXPECT_THROW(CGTable::global().get(4, 1, 3), ConfigError);
}

TEST(ClebschGordan, PerturbedTableIsDetected) {
  auto bad = CGTable::global().perturbed(1, 1, 2, 4, -1.0);
  EXPECT_TRUE(check_cg_oracle(CGTable::global()).pass());
  EXPECT_FALSE(check_cg_oracle(bad).pass());
  EXPECT_FALSE(check_sh_equivariance(bad).pass());
}
