//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "geqshift/molecule.hpp"

namespace geqshift {

struct SyntheticOptions {
  int min_atoms = 5;
  int max_atoms = 30;
  int conformers = 3;
  double jitter = 0.05;  // per-coordinate Gaussian noise between conformers (Angstrom)
};

namespace detail {

inline Vec3 random_bond_step(std::mt19937_64 &rng, double length) {
  return length * random_unit_vector(rng);
}

}  // namespace detail

/// A random heavy-atom chain of C and O with occasional branches,
/// non-clashing 3D coordinates and shift labels that depend on the local
/// chemical environment. Only meant as test and demo data.
inline MoleculeRecord synthetic_molecule(const std::string &id, SaccharideClass cls,
                                         std::uint64_t seed, const SyntheticOptions &opt = {}) {
  std::mt19937_64 rng(seed);
  // larger classes get larger molecules
  const int span = opt.max_atoms - opt.min_atoms;
  const int lo = opt.min_atoms + span * static_cast<int>(cls) / 4;
  const int hi = opt.min_atoms + span * (static_cast<int>(cls) + 1) / 4;
  const int n = std::uniform_int_distribution<int>(lo, std::max(lo, hi))(rng);

  MoleculeRecord r;
  r.id = id;
  r.saccharide_class = cls;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Vec3> pos;
  pos.push_back({0.0, 0.0, 0.0});
  r.atoms.push_back({0, 6, 2});
  for (int a = 1; a < n; ++a) {
    const int z = (a % 3 == 2 || unit(rng) < 0.2) ? 8 : 6;
    // attach to the previous atom most of the time, else branch from an earlier one
    int parent = a - 1;
    if (a > 2 && unit(rng) < 0.25)
      parent = std::uniform_int_distribution<int>(0, a - 2)(rng);
    const double length = (z == 8 || r.atoms[parent].z == 8) ? 1.43 : 1.53;
    Vec3 p{};
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      p = pos[parent] + detail::random_bond_step(rng, length);
      placed = true;
      for (int b = 0; b < a; ++b)
        if (b != parent && norm(p - pos[b]) < 2.3) {
          placed = false;
          break;
        }
    }
    if (!placed) {
      // fall back to extending the chain away from the centroid
      Vec3 c{};
      for (const auto &q : pos)
        c = c + q;
      c = (1.0 / pos.size()) * c;
      Vec3 dir = pos.back() - c;
      const double d = norm(dir);
      dir = d > 0 ? (1.0 / d) * dir : Vec3{1.0, 0.0, 0.0};
      parent = a - 1;
      p = pos[parent] + 2.4 * dir;
    }
    pos.push_back(p);
    r.atoms.push_back({a, z, 0});
    const BondOrder order =
        (z == 8 && r.atoms[parent].z == 6 && unit(rng) < 0.05) ? BondOrder::double_
                                                                : BondOrder::single;
    r.bonds.push_back({parent, a, order});
  }

  std::vector<std::vector<int>> nbrs(n);
  for (const auto &b : r.bonds) {
    nbrs[b.i].push_back(b.j);
    nbrs[b.j].push_back(b.i);
  }
  for (int a = 0; a < n; ++a) {
    const int valence = r.atoms[a].z == 6 ? 4 : 2;
    int used = 0;
    for (const auto &b : r.bonds)
      if (b.i == a || b.j == a)
        used += static_cast<int>(b.order);
    r.atoms[a].n_hydrogens = std::clamp(valence - used, 0, r.atoms[a].z == 6 ? 3 : 1);
  }

  for (int c = 0; c < std::max(1, opt.conformers); ++c) {
    std::normal_distribution<double> noise(0.0, c == 0 ? 0.0 : opt.jitter);
    Conformer conf;
    for (const auto &p : pos)
      conf.push_back({p[0] + noise(rng), p[1] + noise(rng), p[2] + noise(rng)});
    r.conformers.push_back(std::move(conf));
  }

  // labels from the bonded environment and the number of atoms within 3 A
  std::normal_distribution<double> label_noise(0.0, 0.5);
  for (int a = 0; a < n; ++a) {
    if (r.atoms[a].z != 6)
      continue;
    int oxygens = 0;
    for (int b : nbrs[a])
      oxygens += r.atoms[b].z == 8;
    int close = 0;
    for (int b = 0; b < n; ++b)
      if (b != a && norm(pos[a] - pos[b]) < 3.0)
        ++close;
    const double c_shift = 20.0 + 28.0 * oxygens + 4.0 * r.atoms[a].n_hydrogens + 1.5 * close +
                           label_noise(rng);
    r.labels.push_back({a, Nucleus::C13, std::clamp(c_shift, 1.0, 240.0), 1});
    if (r.atoms[a].n_hydrogens > 0) {
      const double h_shift = 1.0 + 1.2 * oxygens + 0.15 * close + 0.05 * label_noise(rng);
      r.labels.push_back({a, Nucleus::H1, std::clamp(h_shift, 0.1, 14.0), 1});
    }
  }
  validate(r);
  return r;
}

/// `per_class` molecules of each listed class, ids "syn-<class>-<k>".
inline std::vector<MoleculeRecord>
synthetic_dataset(int per_class, std::uint64_t seed,
                  const std::vector<SaccharideClass> &classes = {SaccharideClass::mono,
                                                                 SaccharideClass::di,
                                                                 SaccharideClass::tri},
                  const SyntheticOptions &opt = {}) {
  std::vector<MoleculeRecord> out;
  std::uint64_t k = 0;
  for (auto cls : classes)
    for (int i = 0; i < per_class; ++i)
      out.push_back(synthetic_molecule("syn-" + to_string(cls) + "-" + std::to_string(i), cls,
                                       seed * 1000003ULL + k++, opt));
  return out;
}

}  // namespace geqshift
