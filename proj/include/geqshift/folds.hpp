//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geqshift/molecule.hpp"

namespace geqshift {

struct FoldSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
  friend bool operator==(const FoldSplit &, const FoldSplit &) = default;
};

struct Splits {
  std::uint64_t seed = 0;
  std::vector<FoldSplit> folds;
  friend bool operator==(const Splits &, const Splits &) = default;
};

namespace detail {

inline std::vector<std::vector<std::size_t>>
members_by_class(const std::vector<MoleculeRecord> &records) {
  std::vector<std::vector<std::size_t>> members(4);
  for (std::size_t i = 0; i < records.size(); ++i)
    members[static_cast<int>(records[i].saccharide_class)].push_back(i);
  return members;
}

}  // namespace detail

/// Stratified k-fold split. Each saccharide class is shuffled (seeded) and
/// dealt round-robin onto the folds; the starting fold carries over from one
/// class to the next so that fold totals also differ by at most one. Id
/// lists keep dataset order.
inline Splits stratified_kfold(const std::vector<MoleculeRecord> &records, int k,
                               std::uint64_t seed) {
  if (k < 2)
    throw ValidationError("k-fold split requires k >= 2");
  std::mt19937_64 rng(seed);
  std::vector<int> fold_of(records.size(), -1);
  std::size_t offset = 0;
  for (auto &members : detail::members_by_class(records)) {
    if (members.empty())
      continue;
    if (static_cast<int>(members.size()) < k)
      throw ValidationError("saccharide class \"" +
                            to_string(records[members[0]].saccharide_class) + "\" has " +
                            std::to_string(members.size()) + " members, fewer than k = " +
                            std::to_string(k));
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < members.size(); ++i)
      fold_of[members[i]] = static_cast<int>((offset + i) % k);
    offset += members.size();
  }
  Splits s;
  s.seed = seed;
  s.folds.resize(k);
  for (std::size_t i = 0; i < records.size(); ++i)
    for (int f = 0; f < k; ++f)
      (fold_of[i] == f ? s.folds[f].test : s.folds[f].train).push_back(records[i].id);
  return s;
}

/// Seeded, class-stratified hold-out of about `fraction` of the records.
/// Returns (kept, held_out) index lists in dataset order.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
stratified_holdout(const std::vector<MoleculeRecord> &records, double fraction,
                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<bool> held(records.size(), false);
  for (auto &members : detail::members_by_class(records)) {
    if (members.empty())
      continue;
    std::shuffle(members.begin(), members.end(), rng);
    auto n = static_cast<std::size_t>(std::lround(fraction * members.size()));
    n = std::min(n, members.size() - 1);
    for (std::size_t i = 0; i < n; ++i)
      held[members[i]] = true;
  }
  std::vector<std::size_t> kept, out;
  for (std::size_t i = 0; i < records.size(); ++i)
    (held[i] ? out : kept).push_back(i);
  return {kept, out};
}

inline nlohmann::json to_json(const Splits &s) {
  nlohmann::json j;
  j["seed"] = s.seed;
  j["folds"] = nlohmann::json::array();
  for (const auto &f : s.folds)
    j["folds"].push_back({{"train", f.train}, {"test", f.test}});
  return j;
}

inline Splits splits_from_json(const nlohmann::json &j) {
  try {
    Splits s;
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto &f : j.at("folds"))
      s.folds.push_back({f.at("train").get<std::vector<std::string>>(),
                         f.at("test").get<std::vector<std::string>>()});
    return s;
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(std::string("invalid split file: ") + e.what());
  }
}

inline void save_splits(const Splits &s, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out)
    throw ValidationError("cannot write split file " + path.string());
  out << to_json(s).dump(2) << '\n';
}

inline Splits load_splits(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open split file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError("split file " + path.string() + ": " + e.what());
  }
  return splits_from_json(j);
}

}  // namespace geqshift
