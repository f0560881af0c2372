//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "geqshift/checkpoint.hpp"
#include "geqshift/model.hpp"

namespace geqshift {

/// Ensemble prediction for one (atom, nucleus) target.
struct AtomPrediction {
  int atom_index = 0;
  Nucleus nucleus = Nucleus::C13;
  double mean_ppm = 0.0;
  double std_ppm = 0.0;
  std::vector<double> values;  // one per conformer (per model, then conformer)
  std::optional<double> true_ppm;
};

inline double mean_of(const std::vector<double> &v) {
  double s = 0.0;
  for (double x : v)
    s += x;
  return s / static_cast<double>(v.size());
}

/// Population standard deviation.
inline double population_std(const std::vector<double> &v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v)
    ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

struct PredictionTarget {
  int atom_index;
  Nucleus nucleus;
  std::optional<double> true_ppm;
};

/// Labeled (atom, nucleus) pairs in label order; a record without labels
/// gets every carbon (13C) and every carbon carrying hydrogens (1H).
/// Nuclei the model was not trained on are dropped.
inline std::vector<PredictionTarget> prediction_targets(const MoleculeRecord &r,
                                                        NucleusMode mode = NucleusMode::both) {
  auto wanted = [mode](Nucleus n) {
    return mode == NucleusMode::both || (mode == NucleusMode::C) == (n == Nucleus::C13);
  };
  std::vector<PredictionTarget> out;
  if (!r.labels.empty()) {
    for (const auto &l : r.labels)
      if (wanted(l.nucleus))
        out.push_back({l.atom_index, l.nucleus, l.shift_ppm});
    return out;
  }
  for (const auto &a : r.atoms)
    if (a.z == 6 && wanted(Nucleus::C13))
      out.push_back({a.index, Nucleus::C13, std::nullopt});
  for (const auto &a : r.atoms)
    if (a.z == 6 && a.n_hydrogens > 0 && wanted(Nucleus::H1))
      out.push_back({a.index, Nucleus::H1, std::nullopt});
  return out;
}

/// Conformer indices 0..min(n, available)-1.
inline std::vector<int> first_conformers(const MoleculeRecord &r, int n) {
  std::vector<int> out;
  for (int c = 0; c < std::min<int>(n, static_cast<int>(r.conformers.size())); ++c)
    out.push_back(c);
  return out;
}

/// Runs the model on each selected conformer and de-standardizes. Mean is
/// the arithmetic mean over conformers, std the population std. Conformers
/// with degenerate geometry are skipped with a warning.
template <class T>
std::vector<AtomPrediction> predict_ensemble(const MoleculeRecord &record,
                                             const Checkpoint<T> &ck,
                                             const std::vector<int> &conformers) {
  if (conformers.empty())
    throw ValidationError("record \"" + record.id + "\": no conformers selected");
  Architecture arch(ck.config);
  auto targets = prediction_targets(record, ck.config.nucleus);
  std::vector<AtomPrediction> out;
  for (const auto &t : targets)
    out.push_back({t.atom_index, t.nucleus, 0.0, 0.0, {}, t.true_ppm});
  int used = 0;
  for (int c : conformers) {
    MolGraph g;
    try {
      g = build_graph(record, static_cast<std::size_t>(c), ck.config.r_cut);
    } catch (const DegenerateGeometryError &e) {
      log().warn("skipping conformer: {}", e.what());
      continue;
    }
    Matrix<T> z = forward(g, ck.params, arch);
    for (auto &p : out) {
      const int col = static_cast<int>(p.nucleus);
      p.values.push_back(
          ck.standardization.destandardize(static_cast<double>(z(p.atom_index, col)), p.nucleus));
    }
    ++used;
  }
  if (used == 0)
    throw DegenerateGeometryError("record \"" + record.id + "\": every selected conformer is degenerate");
  for (auto &p : out) {
    p.mean_ppm = mean_of(p.values);
    p.std_ppm = population_std(p.values);
  }
  return out;
}

template <class T>
std::vector<AtomPrediction> predict_ensemble(const MoleculeRecord &record, const Checkpoint<T> &ck,
                                             int n_conformers) {
  return predict_ensemble(record, ck, first_conformers(record, n_conformers));
}

/// Throws MismatchError unless every checkpoint has the same model config.
template <class T> void require_compatible(const std::vector<const Checkpoint<T> *> &cks) {
  if (cks.empty())
    throw ValidationError("no checkpoints given");
  const auto ref = to_json(cks.front()->config);
  for (std::size_t i = 1; i < cks.size(); ++i)
    if (to_json(cks[i]->config) != ref)
      throw MismatchError("checkpoint " + std::to_string(i) +
                          " has a different model config than checkpoint 0");
}

/// Average of per-model ensemble means. `std_ppm` is the average of the
/// per-model ensemble stds; `values` holds every model's conformer values.
template <class T>
std::vector<AtomPrediction> predict_multi_model(const MoleculeRecord &record,
                                                const std::vector<const Checkpoint<T> *> &cks,
                                                const std::vector<int> &conformers) {
  require_compatible(cks);
  std::vector<AtomPrediction> out;
  for (std::size_t m = 0; m < cks.size(); ++m) {
    auto p = predict_ensemble(record, *cks[m], conformers);
    if (m == 0) {
      out = std::move(p);
      continue;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i].mean_ppm += p[i].mean_ppm;
      out[i].std_ppm += p[i].std_ppm;
      out[i].values.insert(out[i].values.end(), p[i].values.begin(), p[i].values.end());
    }
  }
  if (cks.size() > 1)
    for (auto &p : out) {
      p.mean_ppm /= static_cast<double>(cks.size());
      p.std_ppm /= static_cast<double>(cks.size());
    }
  return out;
}

}  // namespace geqshift
