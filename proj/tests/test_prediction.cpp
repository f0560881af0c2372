//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace geqshift;

namespace {

Checkpoint<double> random_checkpoint(std::uint64_t seed, int l_max = 2) {
  Checkpoint<double> ck;
  ck.config = gqtest::tiny_config(l_max);
  ck.params = init_params<double>(Architecture(ck.config), seed);
  ck.standardization.mean[0] = 80.0;
  ck.standardization.std[0] = 15.0;
  ck.standardization.mean[1] = 4.0;
  ck.standardization.std[1] = 0.7;
  return ck;
}

MoleculeRecord molecule(int conformers) {
  SyntheticOptions o;
  o.conformers = conformers;
  o.max_atoms = 14;
  o.jitter = 0.2;
  return synthetic_molecule("m", SaccharideClass::di, 31, o);
}

}  // namespace

TEST(Stats, MeanAndPopulationStd) {
  EXPECT_DOUBLE_EQ(mean_of({1.0, 2.0, 6.0}), 3.0);
  EXPECT_DOUBLE_EQ(population_std({1.0, 3.0}), 1.0);
  EXPECT_DOUBLE_EQ(population_std({5.0}), 0.0);
}

TEST(Ensemble, MeanWithinConformerRange) {
  auto ck = random_checkpoint(2);
  auto r = molecule(6);
  auto preds = predict_ensemble(r, ck, 100);
  ASSERT_EQ(preds.size(), r.labels.size());
  Architecture arch(ck.config);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto &p = preds[i];
    ASSERT_EQ(p.values.size(), 6u);
    EXPECT_EQ(p.atom_index, r.labels[i].atom_index);
    EXPECT_EQ(*p.true_ppm, r.labels[i].shift_ppm);
    const auto [lo, hi] = std::minmax_element(p.values.begin(), p.values.end());
    EXPECT_GE(p.mean_ppm, *lo - 1e-12);
    EXPECT_LE(p.mean_ppm, *hi + 1e-12);
    EXPECT_NEAR(p.std_ppm, population_std(p.values), 1e-12);
    EXPECT_GE(p.std_ppm, 0.0);
  }
  // every value is the de-standardized single-conformer forward pass
  for (int c = 0; c < 6; ++c) {
    auto z = forward(build_graph(r, c), ck.params, arch);
    for (const auto &p : preds) {
      const int col = static_cast<int>(p.nucleus);
      EXPECT_NEAR(p.values[c], ck.standardization.destandardize(z(p.atom_index, col), p.nucleus),
                  1e-12);
    }
  }
}

TEST(Ensemble, SingleConformerHasZeroStd) {
  auto ck = random_checkpoint(2);
  auto r = molecule(5);
  for (const auto &p : predict_ensemble(r, ck, 1)) {
    EXPECT_EQ(p.values.size(), 1u);
    EXPECT_EQ(p.std_ppm, 0.0);
    EXPECT_EQ(p.mean_ppm, p.values[0]);
  }
}

TEST(Ensemble, IdenticalConformersGiveZeroSpread) {
  auto ck = random_checkpoint(3);
  auto r = molecule(1);
  r.conformers.assign(4, r.conformers[0]);
  for (const auto &p : predict_ensemble(r, ck, 4)) {
    EXPECT_EQ(p.std_ppm, 0.0);
    EXPECT_EQ(p.values.size(), 4u);
  }
}

TEST(Ensemble, SkipsDegenerateConformer) {
  auto ck = random_checkpoint(3);
  auto r = molecule(3);
  r.conformers[1][1] = r.conformers[1][0];
  auto preds = predict_ensemble(r, ck, 3);
  EXPECT_EQ(preds[0].values.size(), 2u);
  r.conformers[0][1] = r.conformers[0][0];
  r.conformers[2][1] = r.conformers[2][0];
  EXPECT_THROW(predict_ensemble(r, ck, 3), DegenerateGeometryError);
}

TEST(Ensemble, UnlabeledRecordTargets) {
  auto r = molecule(1);
  r.labels.clear();
  auto targets = prediction_targets(r);
  int carbons = 0, ch = 0;
  for (const auto &a : r.atoms) {
    carbons += a.z == 6;
    ch += a.z == 6 && a.n_hydrogens > 0;
  }
  EXPECT_EQ(static_cast<int>(targets.size()), carbons + ch);
  for (const auto &t : targets)
    EXPECT_FALSE(t.true_ppm.has_value());
  EXPECT_EQ(static_cast<int>(prediction_targets(r, NucleusMode::C).size()), carbons);
  auto preds = predict_ensemble(r, random_checkpoint(1), 1);
  EXPECT_EQ(preds.size(), targets.size());
}

TEST(MultiModel, AveragesMeans) {
  auto a = random_checkpoint(4), b = random_checkpoint(5);
  auto r = molecule(3);
  auto pa = predict_ensemble(r, a, 3), pb = predict_ensemble(r, b, 3);
  auto pm = predict_multi_model<double>(r, {&a, &b}, first_conformers(r, 3));
  ASSERT_EQ(pm.size(), pa.size());
  for (std::size_t i = 0; i < pm.size(); ++i) {
    EXPECT_NEAR(pm[i].mean_ppm, 0.5 * (pa[i].mean_ppm + pb[i].mean_ppm), 1e-12);
    EXPECT_NEAR(pm[i].std_ppm, 0.5 * (pa[i].std_ppm + pb[i].std_ppm), 1e-12);
    EXPECT_EQ(pm[i].values.size(), 6u);
  }
}

TEST(MultiModel, ConfigMismatch) {
  auto a = random_checkpoint(4, 2), b = random_checkpoint(5, 0);
  auto r = molecule(1);
  EXPECT_THROW(predict_multi_model<double>(r, {&a, &b}, {0}), MismatchError);
  EXPECT_THROW(predict_multi_model<double>(r, {}, {0}), ValidationError);
}

TEST(External, ErrorTable) {
  auto a = random_checkpoint(4);
  auto r = molecule(2);
  auto ev = evaluate_external<double>(r, {&a}, 2);
  ASSERT_EQ(ev.rows.size(), r.labels.size());
  for (const auto &row : ev.rows)
    EXPECT_DOUBLE_EQ(row.delta_ppm, row.pred_ppm - row.true_ppm);
  std::vector<double> c;
  for (const auto &row : ev.rows)
    if (row.nucleus == Nucleus::C13)
      c.push_back(std::abs(row.delta_ppm));
  EXPECT_NEAR(ev.mae.at(Nucleus::C13), mean_of(c), 1e-12);
  r.labels.clear();
  EXPECT_THROW(evaluate_external<double>(r, {&a}, 2), ValidationError);
}
