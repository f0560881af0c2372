//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "geqshift/error.hpp"
#include "geqshift/geometry.hpp"
#include "geqshift/logging.hpp"

namespace geqshift {

enum class SaccharideClass { mono, di, tri, poly };
enum class Nucleus { C13, H1 };
enum class BondOrder { none = 0, single = 1, double_ = 2 };

inline constexpr int num_bond_codes = 3;

inline std::string to_string(SaccharideClass c) {
  switch (c) {
  case SaccharideClass::mono: return "mono";
  case SaccharideClass::di: return "di";
  case SaccharideClass::tri: return "tri";
  case SaccharideClass::poly: return "poly";
  }
  return "?";
}

inline SaccharideClass parse_saccharide_class(const std::string &s) {
  if (s == "mono") return SaccharideClass::mono;
  if (s == "di") return SaccharideClass::di;
  if (s == "tri") return SaccharideClass::tri;
  if (s == "poly") return SaccharideClass::poly;
  throw ValidationError("unknown saccharide class \"" + s + "\"");
}

inline std::string to_string(Nucleus n) { return n == Nucleus::C13 ? "C" : "H"; }

inline Nucleus parse_nucleus(const std::string &s) {
  if (s == "C") return Nucleus::C13;
  if (s == "H") return Nucleus::H1;
  throw ValidationError("unknown nucleus \"" + s + "\" (expected \"C\" or \"H\")");
}

/// Heavy atom; hydrogens are folded into `n_hydrogens`.
struct Atom {
  int index = 0;
  int z = 6;
  int n_hydrogens = 0;
  friend bool operator==(const Atom &, const Atom &) = default;
};

struct Bond {
  int i = 0, j = 0;
  BondOrder order = BondOrder::single;
  friend bool operator==(const Bond &, const Bond &) = default;
};

/// One experimental shift. H1 labels sit on the heavy atom carrying the
/// protons; `n_equivalent` records how many protons were averaged into the
/// value.
struct ShiftLabel {
  int atom_index = 0;
  Nucleus nucleus = Nucleus::C13;
  double shift_ppm = 0.0;
  int n_equivalent = 1;
  friend bool operator==(const ShiftLabel &, const ShiftLabel &) = default;
};

using Conformer = std::vector<Vec3>;

struct MoleculeRecord {
  std::string id;
  SaccharideClass saccharide_class = SaccharideClass::mono;
  std::optional<std::string> smiles;
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::vector<Conformer> conformers;
  std::vector<ShiftLabel> labels;

  int num_atoms() const { return static_cast<int>(atoms.size()); }
  friend bool operator==(const MoleculeRecord &, const MoleculeRecord &) = default;
};

struct LabelCounts {
  std::size_t c13 = 0;
  std::size_t h1 = 0;
};

inline LabelCounts count_labels(const std::vector<MoleculeRecord> &records) {
  LabelCounts c;
  for (const auto &r : records)
    for (const auto &l : r.labels)
      (l.nucleus == Nucleus::C13 ? c.c13 : c.h1)++;
  return c;
}

/// Checks every MoleculeRecord invariant; throws ValidationError naming the
/// record id and field path.
inline void validate(const MoleculeRecord &r) {
  auto fail = [&](const std::string &path, const std::string &what) {
    throw ValidationError("record \"" + r.id + "\": " + path + ": " + what);
  };
  if (r.id.empty())
    fail("id", "empty id");
  const int n = r.num_atoms();
  if (n == 0)
    fail("atoms", "no atoms");
  for (int a = 0; a < n; ++a) {
    const auto &atom = r.atoms[a];
    const std::string p = "atoms[" + std::to_string(a) + "]";
    if (atom.z < 2 || atom.z > 118)
      fail(p + ".z", "expected a heavy-atom atomic number, got " + std::to_string(atom.z));
    if (atom.n_hydrogens < 0 || atom.n_hydrogens > 4)
      fail(p + ".h", "hydrogen count out of [0,4]: " + std::to_string(atom.n_hydrogens));
  }
  std::set<std::pair<int, int>> seen;
  for (std::size_t b = 0; b < r.bonds.size(); ++b) {
    const auto &bond = r.bonds[b];
    const std::string p = "bonds[" + std::to_string(b) + "]";
    if (bond.i < 0 || bond.i >= n || bond.j < 0 || bond.j >= n)
      fail(p, "atom index out of range");
    if (bond.i == bond.j)
      fail(p, "self bond");
    auto key = std::minmax(bond.i, bond.j);
    if (!seen.insert(key).second)
      fail(p, "duplicate bond");
  }
  if (r.conformers.empty())
    fail("conformers", "at least one conformer is required");
  for (std::size_t c = 0; c < r.conformers.size(); ++c) {
    const auto &conf = r.conformers[c];
    const std::string p = "conformers[" + std::to_string(c) + "]";
    if (static_cast<int>(conf.size()) != n)
      fail(p, "has " + std::to_string(conf.size()) + " rows, expected " + std::to_string(n));
    for (std::size_t a = 0; a < conf.size(); ++a)
      for (double v : conf[a])
        if (!std::isfinite(v))
          fail(p + "[" + std::to_string(a) + "]", "non-finite coordinate");
  }
  std::set<std::pair<int, int>> labelled;
  for (std::size_t k = 0; k < r.labels.size(); ++k) {
    const auto &l = r.labels[k];
    const std::string p = "labels[" + std::to_string(k) + "]";
    if (l.atom_index < 0 || l.atom_index >= n)
      fail(p + ".atom", "atom index out of range");
    if (!std::isfinite(l.shift_ppm))
      fail(p + ".shift", "non-finite shift");
    if (l.nucleus == Nucleus::C13) {
      if (r.atoms[l.atom_index].z != 6)
        fail(p + ".atom", "13C label on a non-carbon atom");
      if (l.shift_ppm < 0.0 || l.shift_ppm > 250.0)
        fail(p + ".shift", "13C shift outside [0,250] ppm");
      if (l.n_equivalent != 1)
        fail(p + ".n_eq", "13C labels must have n_eq = 1");
    } else {
      if (r.atoms[l.atom_index].n_hydrogens == 0)
        fail(p + ".atom", "1H label on an atom without hydrogens");
      if (l.shift_ppm < 0.0 || l.shift_ppm > 15.0)
        fail(p + ".shift", "1H shift outside [0,15] ppm");
      if (l.n_equivalent < 1 || l.n_equivalent > r.atoms[l.atom_index].n_hydrogens)
        fail(p + ".n_eq", "n_eq must be in [1, hydrogen count]");
    }
    if (!labelled.insert({l.atom_index, static_cast<int>(l.nucleus)}).second)
      fail(p, "duplicate label for atom/nucleus");
  }
}

inline nlohmann::json to_json(const MoleculeRecord &r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["class"] = to_string(r.saccharide_class);
  j["smiles"] = r.smiles ? nlohmann::json(*r.smiles) : nlohmann::json(nullptr);
  auto &atoms = j["atoms"] = nlohmann::json::array();
  for (const auto &a : r.atoms)
    atoms.push_back({{"z", a.z}, {"h", a.n_hydrogens}});
  auto &bonds = j["bonds"] = nlohmann::json::array();
  for (const auto &b : r.bonds)
    bonds.push_back({b.i, b.j, static_cast<int>(b.order)});
  auto &confs = j["conformers"] = nlohmann::json::array();
  for (const auto &c : r.conformers) {
    auto rows = nlohmann::json::array();
    for (const auto &p : c)
      rows.push_back({p[0], p[1], p[2]});
    confs.push_back(std::move(rows));
  }
  auto &labels = j["labels"] = nlohmann::json::array();
  for (const auto &l : r.labels)
    labels.push_back({{"atom", l.atom_index},
                      {"nucleus", to_string(l.nucleus)},
                      {"shift", l.shift_ppm},
                      {"n_eq", l.n_equivalent}});
  return j;
}

/// Parses one JSON object into a record (no invariant checks beyond types).
inline MoleculeRecord record_from_json(const nlohmann::json &j) {
  MoleculeRecord r;
  std::string where = "record";
  auto field = [&](const nlohmann::json &obj, const char *key,
                   const std::string &path) -> const nlohmann::json & {
    if (!obj.is_object() || !obj.contains(key))
      throw ValidationError(where + ": missing field " + path);
    return obj.at(key);
  };
  try {
    r.id = field(j, "id", "id").get<std::string>();
    where = "record \"" + r.id + "\"";
    r.saccharide_class = parse_saccharide_class(field(j, "class", "class").get<std::string>());
    if (j.contains("smiles") && !j.at("smiles").is_null())
      r.smiles = j.at("smiles").get<std::string>();
    const auto &atoms = field(j, "atoms", "atoms");
    for (std::size_t a = 0; a < atoms.size(); ++a) {
      const std::string p = "atoms[" + std::to_string(a) + "]";
      r.atoms.push_back({static_cast<int>(a), field(atoms[a], "z", p + ".z").get<int>(),
                         field(atoms[a], "h", p + ".h").get<int>()});
    }
    const auto &bonds = field(j, "bonds", "bonds");
    for (std::size_t b = 0; b < bonds.size(); ++b) {
      const auto &t = bonds[b];
      if (!t.is_array() || t.size() != 3)
        throw ValidationError(where + ": bonds[" + std::to_string(b) + "]: expected [i,j,order]");
      int order = t[2].get<int>();
      if (order < 0 || order >= num_bond_codes)
        throw ValidationError(where + ": bonds[" + std::to_string(b) + "][2]: bond order must be 0, 1 or 2");
      r.bonds.push_back({t[0].get<int>(), t[1].get<int>(), static_cast<BondOrder>(order)});
    }
    const auto &confs = field(j, "conformers", "conformers");
    for (std::size_t c = 0; c < confs.size(); ++c) {
      Conformer conf;
      for (std::size_t a = 0; a < confs[c].size(); ++a) {
        const auto &p = confs[c][a];
        if (!p.is_array() || p.size() != 3)
          throw ValidationError(where + ": conformers[" + std::to_string(c) + "][" +
                                std::to_string(a) + "]: expected [x,y,z]");
        conf.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
      }
      r.conformers.push_back(std::move(conf));
    }
    const auto &labels = field(j, "labels", "labels");
    for (std::size_t k = 0; k < labels.size(); ++k) {
      const std::string p = "labels[" + std::to_string(k) + "]";
      ShiftLabel l;
      l.atom_index = field(labels[k], "atom", p + ".atom").get<int>();
      l.nucleus = parse_nucleus(field(labels[k], "nucleus", p + ".nucleus").get<std::string>());
      l.shift_ppm = field(labels[k], "shift", p + ".shift").get<double>();
      l.n_equivalent = labels[k].contains("n_eq") ? labels[k].at("n_eq").get<int>() : 1;
      r.labels.push_back(l);
    }
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(where + ": " + e.what());
  }
  return r;
}

/// Reads a JSON-Lines dataset, validating every record.
inline std::vector<MoleculeRecord> load_dataset(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open dataset " + path.string());
  std::vector<MoleculeRecord> records;
  std::unordered_set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error &e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    MoleculeRecord r = record_from_json(j);
    validate(r);
    if (!ids.insert(r.id).second)
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": duplicate record id \"" + r.id + "\"");
    records.push_back(std::move(r));
  }
  if (records.empty())
    log().warn("dataset {} contains no records", path.string());
  auto counts = count_labels(records);
  log().info("loaded {} records ({} 13C, {} 1H labels) from {}", records.size(), counts.c13,
             counts.h1, path.string());
  return records;
}

inline void save_dataset(const std::vector<MoleculeRecord> &records,
                         const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out)
    throw ValidationError("cannot write dataset " + path.string());
  for (const auto &r : records)
    out << to_json(r).dump() << '\n';
}

}  // namespace geqshift
