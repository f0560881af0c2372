//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <limits>
#include <map>
#include <vector>

#include "geqshift/molecule.hpp"

namespace geqshift {

/// Directed edge src -> dst. `unit_vec` points from src to dst
/// (r_dst - r_src normalized), the relative position seen by the receiving
/// node.
struct Edge {
  int src = 0;
  int dst = 0;
  double distance = 0.0;
  Vec3 unit_vec{};
  BondOrder bond = BondOrder::none;
};

/// One conformer's realized graph over the heavy atoms.
struct MolGraph {
  std::vector<Atom> atoms;
  std::vector<Edge> edges;

  int num_nodes() const { return static_cast<int>(atoms.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
};

inline constexpr double default_cutoff = 6.0;

/// Edges between every ordered pair closer than `cutoff`, plus every bonded
/// pair regardless of distance. No self edges. Edges are ordered by (dst,
/// src).
inline MolGraph build_graph(const MoleculeRecord &record, std::size_t conformer_index,
                            double cutoff = default_cutoff) {
  if (conformer_index >= record.conformers.size())
    throw ValidationError("record \"" + record.id + "\": conformer index " +
                          std::to_string(conformer_index) + " out of range");
  if (!(cutoff > 0))
    throw ConfigError("cutoff radius must be positive");
  const auto &pos = record.conformers[conformer_index];
  const int n = record.num_atoms();
  std::map<std::pair<int, int>, BondOrder> bonds;
  for (const auto &b : record.bonds) {
    bonds[{b.i, b.j}] = b.order;
    bonds[{b.j, b.i}] = b.order;
  }
  MolGraph g;
  g.atoms = record.atoms;
  for (int dst = 0; dst < n; ++dst)
    for (int src = 0; src < n; ++src) {
      if (src == dst)
        continue;
      Vec3 rel = pos[dst] - pos[src];
      double d = norm(rel);
      auto bond = bonds.find({src, dst});
      const bool bonded = bond != bonds.end();
      if (!(d < cutoff) && !bonded)
        continue;
      if (!(d > 0.0))
        throw DegenerateGeometryError("record \"" + record.id + "\" conformer " +
                                      std::to_string(conformer_index) + ": atoms " +
                                      std::to_string(src) + " and " + std::to_string(dst) +
                                      " coincide");
      Edge e;
      e.src = src;
      e.dst = dst;
      e.distance = d;
      e.unit_vec = (1.0 / d) * rel;
      e.bond = bonded ? bond->second : BondOrder::none;
      g.edges.push_back(e);
    }
  return g;
}

/// Disjoint union of several graphs with per-graph node offsets.
struct BatchGraph {
  std::vector<Atom> atoms;
  std::vector<Edge> edges;
  std::vector<int> node_offset;  // size = graphs + 1

  int num_nodes() const { return static_cast<int>(atoms.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int num_graphs() const { return static_cast<int>(node_offset.size()) - 1; }
};

inline BatchGraph batch_graphs(const std::vector<const MolGraph *> &graphs) {
  BatchGraph b;
  b.node_offset.push_back(0);
  for (const auto *g : graphs) {
    const int off = b.num_nodes();
    b.atoms.insert(b.atoms.end(), g->atoms.begin(), g->atoms.end());
    for (auto e : g->edges) {
      e.src += off;
      e.dst += off;
      b.edges.push_back(e);
    }
    b.node_offset.push_back(b.num_nodes());
  }
  return b;
}

inline BatchGraph batch_graphs(const MolGraph &g) { return batch_graphs({&g}); }

}  // namespace geqshift
