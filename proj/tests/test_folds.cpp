//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace geqshift;

namespace {

/// Lightweight records: only id and class matter for splitting.
std::vector<MoleculeRecord> corpus(int mono, int di, int tri) {
  std::vector<MoleculeRecord> out;
  auto add = [&](int n, SaccharideClass c) {
    for (int i = 0; i < n; ++i) {
      MoleculeRecord r;
      r.id = to_string(c) + std::to_string(i);
      r.saccharide_class = c;
      out.push_back(r);
    }
  };
  add(mono, SaccharideClass::mono);
  add(di, SaccharideClass::di);
  add(tri, SaccharideClass::tri);
  return out;
}

}  // namespace

TEST(Folds, FullSizeCorpus) {
  auto data = corpus(107, 153, 115);
  auto s = stratified_kfold(data, 10, 1);
  ASSERT_EQ(s.folds.size(), 10u);
  std::map<std::string, int> seen;
  for (const auto &f : s.folds) {
    EXPECT_GE(f.test.size(), 37u);
    EXPECT_LE(f.test.size(), 38u);
    EXPECT_EQ(f.test.size() + f.train.size(), data.size());
    for (const auto &id : f.test)
      ++seen[id];
    std::set<std::string> train(f.train.begin(), f.train.end());
    for (const auto &id : f.test)
      EXPECT_EQ(train.count(id), 0u);
  }
  EXPECT_EQ(seen.size(), data.size());
  for (const auto &[id, n] : seen)
    EXPECT_EQ(n, 1) << id;
}

TEST(Folds, ClassProportionsWithinOne) {
  auto data = corpus(107, 153, 115);
  auto s = stratified_kfold(data, 10, 3);
  std::map<std::string, SaccharideClass> cls;
  for (const auto &r : data)
    cls[r.id] = r.saccharide_class;
  const double total[3] = {107, 153, 115};
  for (const auto &f : s.folds) {
    int count[3] = {0, 0, 0};
    for (const auto &id : f.test)
      ++count[static_cast<int>(cls[id])];
    for (int c = 0; c < 3; ++c) {
      EXPECT_LE(std::abs(count[c] - total[c] * f.test.size() / data.size()), 1.0 + 1e-9);
      EXPECT_GE(count[c], static_cast<int>(total[c]) / 10);
      EXPECT_LE(count[c], static_cast<int>(total[c]) / 10 + 1);
    }
  }
}

TEST(Folds, DeterministicAndSeedSensitive) {
  auto data = corpus(20, 20, 20);
  EXPECT_EQ(stratified_kfold(data, 10, 7), stratified_kfold(data, 10, 7));
  EXPECT_FALSE(stratified_kfold(data, 10, 7) == stratified_kfold(data, 10, 8));
}

TEST(Folds, TooFewMembers) {
  EXPECT_THROW(stratified_kfold(corpus(20, 9, 20), 10, 0), ValidationError);
  EXPECT_THROW(stratified_kfold(corpus(20, 20, 20), 1, 0), ValidationError);
}

TEST(Folds, JsonRoundTrip) {
  auto s = stratified_kfold(corpus(12, 12, 12), 4, 5);
  auto p = gqtest::temp_dir("folds") / "splits.json";
  save_splits(s, p);
  EXPECT_EQ(load_splits(p), s);
  EXPECT_THROW(splits_from_json(nlohmann::json::parse(R"({"folds":[]})")), ValidationError);
}

TEST(Folds, StratifiedHoldout) {
  auto data = corpus(40, 40, 20);
  auto [kept, held] = stratified_holdout(data, 0.05, 2);
  EXPECT_EQ(kept.size() + held.size(), data.size());
  EXPECT_EQ(held.size(), 2u + 2u + 1u);
}
