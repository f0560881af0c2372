//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geqshift/checkpoint.hpp"
#include "geqshift/folds.hpp"
#include "geqshift/model.hpp"

namespace geqshift {

/// plateau: reduce on a validation plateau (single-conformer training);
/// step: fixed decay per epoch over a fixed epoch count (ensemble training);
/// constant: fixed lr for a fixed number of epochs or steps.
enum class ScheduleKind { plateau, step, constant };

inline std::string to_string(ScheduleKind k) {
  switch (k) {
  case ScheduleKind::plateau:
    return "plateau";
  case ScheduleKind::step:
    return "step";
  case ScheduleKind::constant:
    return "constant";
  }
  return "?";
}

inline ScheduleKind parse_schedule(const std::string &s) {
  if (s == "plateau")
    return ScheduleKind::plateau;
  if (s == "step")
    return ScheduleKind::step;
  if (s == "constant")
    return ScheduleKind::constant;
  throw ConfigError("unknown schedule \"" + s + "\" (plateau|step|constant)");
}

struct TrainConfig {
  int batch_size = 32;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  ScheduleKind schedule = ScheduleKind::step;
  int patience = 20;
  double factor = 0.1;
  double val_frac = 0.05;
  int step_epochs = 3;
  double min_lr = 1e-7;   // plateau: stop once lr falls below this
  int max_epochs = 500;   // plateau and constant schedules
  long max_steps = 0;     // 0: no cap on optimizer steps
  int n_conformers_train = 100;
  double clip_norm = 0.0; // 0: no gradient clipping
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size <= 0)
      throw ConfigError("train config: batch_size must be positive");
    if (!(lr >= 0))
      throw ConfigError("train config: lr must be >= 0");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
      throw ConfigError("train config: Adam betas must lie in [0,1)");
    if (!(adam_eps > 0))
      throw ConfigError("train config: adam_eps must be positive");
    if (patience <= 0)
      throw ConfigError("train config: patience must be positive");
    if (!(factor > 0 && factor < 1))
      throw ConfigError("train config: factor must lie in (0,1)");
    if (!(val_frac > 0 && val_frac < 0.5))
      throw ConfigError("train config: val_frac must lie in (0,0.5)");
    if (step_epochs <= 0 || max_epochs <= 0)
      throw ConfigError("train config: epoch counts must be positive");
    if (max_steps < 0)
      throw ConfigError("train config: max_steps must be >= 0");
    if (n_conformers_train <= 0)
      throw ConfigError("train config: n_conformers_train must be positive");
    if (!(clip_norm >= 0))
      throw ConfigError("train config: clip_norm must be >= 0");
  }
};

inline nlohmann::json to_json(const TrainConfig &c) {
  return {{"batch_size", c.batch_size},
          {"lr", c.lr},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"schedule", to_string(c.schedule)},
          {"patience", c.patience},
          {"factor", c.factor},
          {"val_frac", c.val_frac},
          {"step_epochs", c.step_epochs},
          {"min_lr", c.min_lr},
          {"max_epochs", c.max_epochs},
          {"max_steps", c.max_steps},
          {"n_conformers_train", c.n_conformers_train},
          {"clip_norm", c.clip_norm},
          {"seed", c.seed}};
}

inline void update_from_json(TrainConfig &c, const nlohmann::json &j) {
  static const std::set<std::string> known{
      "batch_size", "lr",       "beta1",     "beta2",     "adam_eps",
      "schedule",   "patience", "factor",    "val_frac",  "step_epochs",
      "min_lr",     "max_epochs", "max_steps", "n_conformers_train", "clip_norm", "seed"};
  try {
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!known.count(it.key()))
        throw ConfigError("unknown train config key \"" + it.key() + "\"");
    auto get = [&](const char *k, auto &v) {
      if (j.contains(k))
        v = j.at(k).get<std::decay_t<decltype(v)>>();
    };
    get("batch_size", c.batch_size);
    get("lr", c.lr);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("adam_eps", c.adam_eps);
    get("patience", c.patience);
    get("factor", c.factor);
    get("val_frac", c.val_frac);
    get("step_epochs", c.step_epochs);
    get("min_lr", c.min_lr);
    get("max_epochs", c.max_epochs);
    get("max_steps", c.max_steps);
    get("n_conformers_train", c.n_conformers_train);
    get("clip_norm", c.clip_norm);
    get("seed", c.seed);
    if (j.contains("schedule"))
      c.schedule = parse_schedule(j.at("schedule").get<std::string>());
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

/// One (molecule, conformer) training example. Targets are standardized;
/// mask entries are 1 where a label exists (column 0: 13C, 1: 1H).
template <class T> struct TrainItem {
  std::string id;
  int conformer = 0;
  MolGraph graph;
  std::shared_ptr<const Matrix<T>> target;
  std::shared_ptr<const Matrix<T>> mask;
};

/// Target and mask matrices for a record's labels. H labels sit on the
/// parent heavy atom (already averaged over equivalent protons).
template <class T>
std::pair<Matrix<T>, Matrix<T>> label_matrices(const MoleculeRecord &r, const Standardization &s,
                                               NucleusMode nucleus = NucleusMode::both) {
  Matrix<T> target(r.num_atoms(), 2), mask(r.num_atoms(), 2);
  for (const auto &l : r.labels) {
    const int col = static_cast<int>(l.nucleus);
    if ((nucleus == NucleusMode::C && col != 0) || (nucleus == NucleusMode::H && col != 1))
      continue;
    target(l.atom_index, col) = static_cast<T>(s.standardize(l.shift_ppm, l.nucleus));
    mask(l.atom_index, col) = T(1);
  }
  return {std::move(target), std::move(mask)};
}

/// One item per (record, conformer) for the first min(n_conformers,
/// available) conformers of each record.
template <class T>
std::vector<TrainItem<T>> expand_dataset(const std::vector<MoleculeRecord> &records, int n_conformers,
                                         const Standardization &s,
                                         NucleusMode nucleus = NucleusMode::both,
                                         double cutoff = default_cutoff) {
  if (n_conformers <= 0)
    throw ConfigError("n_conformers must be positive");
  std::vector<TrainItem<T>> items;
  int short_records = 0;
  for (const auto &r : records) {
    if (r.conformers.empty())
      throw ValidationError("record \"" + r.id + "\" has no conformers");
    const int n = std::min<int>(n_conformers, static_cast<int>(r.conformers.size()));
    short_records += n < n_conformers;
    auto [target, mask] = label_matrices<T>(r, s, nucleus);
    bool any = false;
    for (T v : mask.data)
      any = any || v != T{};
    if (!any)
      throw ValidationError("record \"" + r.id + "\" has no usable labels for training");
    auto tp = std::make_shared<const Matrix<T>>(std::move(target));
    auto mp = std::make_shared<const Matrix<T>>(std::move(mask));
    for (int c = 0; c < n; ++c)
      items.push_back({r.id, c, build_graph(r, c, cutoff), tp, mp});
  }
  if (short_records > 0)
    log().warn("{} records have fewer than {} conformers; using all available", short_records,
               n_conformers);
  return items;
}

/// Loss and gradient of a batch.
template <class T> struct BatchGradients {
  T loss{};
  ParamMap<T> grads;
  int entries = 0;
};

/// Disjoint-union batch of items with stacked targets and masks.
template <class T> struct Batch {
  BatchGraph graph;
  std::shared_ptr<const Matrix<T>> target;
  std::shared_ptr<const Matrix<T>> mask;
};

template <class T> Batch<T> make_batch(const std::vector<const TrainItem<T> *> &items) {
  if (items.empty())
    throw ValidationError("empty batch");
  std::vector<const MolGraph *> graphs;
  int rows = 0;
  for (const auto *it : items) {
    graphs.push_back(&it->graph);
    rows += it->graph.num_nodes();
  }
  Matrix<T> target(rows, 2), mask(rows, 2);
  int off = 0;
  for (const auto *it : items) {
    std::copy(it->target->data.begin(), it->target->data.end(), target.data.begin() + 2 * off);
    std::copy(it->mask->data.begin(), it->mask->data.end(), mask.data.begin() + 2 * off);
    off += it->graph.num_nodes();
  }
  return {batch_graphs(graphs), std::make_shared<const Matrix<T>>(std::move(target)),
          std::make_shared<const Matrix<T>>(std::move(mask))};
}

/// Mean absolute error over masked entries (plain values, no tape).
template <class T>
T mae_loss(const Matrix<T> &pred, const Matrix<T> &target, const Matrix<T> &mask) {
  Tape<T> tape;
  Var p = tape.constant(pred);
  Var l = ops::masked_mae(tape, p, std::make_shared<const Matrix<T>>(target),
                          std::make_shared<const Matrix<T>>(mask));
  return tape.value(l).data[0];
}

/// Reverse-mode gradient of the batch MAE with respect to every parameter.
/// Throws NumericalError naming the first parameter with a non-finite
/// gradient.
template <class T>
BatchGradients<T> gradients(const Architecture &arch, const ParamMap<T> &params,
                            const Batch<T> &batch) {
  Tape<T> tape;
  auto p = load_params(tape, params, true);
  auto in = prepare_inputs<T>(arch, batch.graph);
  Var out = forward(tape, arch, p, in);
  Var loss = ops::masked_mae(tape, out, batch.target, batch.mask);
  tape.backward(loss);
  BatchGradients<T> g;
  g.loss = tape.value(loss).data[0];
  if (!std::isfinite(static_cast<double>(g.loss)))
    throw NumericalError("non-finite loss");
  for (const auto &[name, v] : p) {
    Matrix<T> grad = tape.has_grad(v) ? tape.grad(v) : Matrix<T>(params.at(name).rows,
                                                                 params.at(name).cols);
    for (T x : grad.data)
      if (!std::isfinite(static_cast<double>(x)))
        throw NumericalError("non-finite gradient in parameter \"" + name + "\"");
    g.grads.emplace(name, std::move(grad));
  }
  for (T m : batch.mask->data)
    g.entries += m != T{};
  return g;
}

template <class T> struct AdamState {
  ParamMap<T> m, v;
  long step = 0;
  double lr = 3e-4;
};

template <class T> AdamState<T> make_adam_state(const ParamMap<T> &params, double lr) {
  AdamState<T> s;
  s.lr = lr;
  for (const auto &[name, p] : params) {
    s.m.emplace(name, Matrix<T>(p.rows, p.cols));
    s.v.emplace(name, Matrix<T>(p.rows, p.cols));
  }
  return s;
}

/// Adam with bias correction.
template <class T>
void adam_step(ParamMap<T> &params, const ParamMap<T> &grads, AdamState<T> &state,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (grads.size() != params.size())
    throw MismatchError("gradient and parameter key sets differ");
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (auto &[name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end())
      throw MismatchError("no gradient for parameter \"" + name + "\"");
    const auto &g = git->second;
    auto &m = state.m.at(name);
    auto &v = state.v.at(name);
    if (g.size() != p.size() || m.size() != p.size())
      throw MismatchError("shape mismatch for parameter \"" + name + "\"");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.data[i];
      const double mi = beta1 * m.data[i] + (1.0 - beta1) * gi;
      const double vi = beta2 * v.data[i] + (1.0 - beta2) * gi * gi;
      m.data[i] = static_cast<T>(mi);
      v.data[i] = static_cast<T>(vi);
      const double update = state.lr * (mi / c1) / (std::sqrt(vi / c2) + eps);
      p.data[i] = static_cast<T>(p.data[i] - update);
    }
  }
}

/// Scales all gradients so that their global L2 norm is at most `max_norm`.
template <class T> void clip_gradients(ParamMap<T> &grads, double max_norm) {
  double ss = 0.0;
  for (const auto &[name, g] : grads)
    for (T x : g.data)
      ss += static_cast<double>(x) * x;
  const double norm = std::sqrt(ss);
  if (norm <= max_norm || norm == 0.0)
    return;
  const double scale = max_norm / norm;
  for (auto &[name, g] : grads)
    for (auto &x : g.data)
      x = static_cast<T>(x * scale);
}

/// Learning rate reduced by `factor` once the best validation value has
/// not strictly improved for `patience` consecutive epochs.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr, int patience = 20, double factor = 0.1)
      : lr_(lr), patience_(patience), factor_(factor) {}

  /// Records one epoch's validation value; returns the lr for the next epoch.
  double update(double value) {
    if (value < best_) {
      best_ = value;
      bad_ = 0;
    } else if (++bad_ >= patience_) {
      lr_ *= factor_;
      bad_ = 0;
    }
    return lr_;
  }
  double lr() const { return lr_; }
  double best() const { return best_; }
  int bad_epochs() const { return bad_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_ = 0;
};

/// lr for epoch e of the fixed-length schedule: lr0 * factor^e.
inline double step_schedule(int epoch, double lr0 = 3e-4, double factor = 0.1, int epochs = 3) {
  if (epoch < 0)
    throw ConfigError("negative epoch");
  if (epoch >= epochs)
    throw ConfigError("epoch " + std::to_string(epoch) + " is past the end of the " +
                      std::to_string(epochs) + "-epoch schedule");
  return lr0 * std::pow(factor, epoch);
}

struct LogRow {
  int epoch = 0;
  long step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_mae_C;
  std::optional<double> val_mae_H;
};

inline std::string log_csv(const std::vector<LogRow> &rows) {
  std::string out = "epoch,step,lr,train_loss,val_mae_C,val_mae_H\n";
  char buf[256];
  for (const auto &r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%ld,%.17g,%.17g,", r.epoch, r.step, r.lr, r.train_loss);
    out += buf;
    if (r.val_mae_C) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.val_mae_C);
      out += buf;
    }
    out += ',';
    if (r.val_mae_H) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.val_mae_H);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

template <class T> struct TrainResult {
  Checkpoint<T> checkpoint;
  std::vector<LogRow> log;
  std::vector<std::string> validation_ids;
};

namespace detail {

/// Per-nucleus MAE in ppm and the standardized masked MAE over items.
template <class T>
std::array<double, 3> validation_errors(const Architecture &arch, const ParamMap<T> &params,
                                        const std::vector<TrainItem<T>> &items,
                                        const Standardization &s) {
  double sum[2] = {0, 0}, zsum = 0;
  long n[2] = {0, 0};
  for (const auto &it : items) {
    Matrix<T> out = forward(it.graph, params, arch);
    for (int a = 0; a < out.rows; ++a)
      for (int c = 0; c < 2; ++c)
        if ((*it.mask)(a, c) != T{}) {
          const double dz = static_cast<double>(out(a, c)) - (*it.target)(a, c);
          zsum += std::abs(dz);
          sum[c] += std::abs(dz) * s.std[c];
          ++n[c];
        }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {n[0] ? sum[0] / n[0] : nan, n[1] ? sum[1] / n[1] : nan,
          (n[0] + n[1]) ? zsum / (n[0] + n[1]) : nan};
}

}  // namespace detail

/// Called after every optimizer step with (step, batch loss).
using StepCallback = std::function<void(long, double)>;

/// Trains a model on `records`. Standardization constants come from the
/// training labels only (the validation hold-out of the plateau schedule
/// excluded). Deterministic for fixed seeds.
template <class T>
TrainResult<T> train(const std::vector<MoleculeRecord> &records, const TrainConfig &cfg,
                     const ModelConfig &mcfg, const StepCallback &on_step = {}) {
  cfg.validate();
  Architecture arch(mcfg);
  TrainResult<T> result;

  std::vector<MoleculeRecord> train_set, val_set;
  if (cfg.schedule == ScheduleKind::plateau) {
    auto [kept, held] = stratified_holdout(records, cfg.val_frac, cfg.seed);
    for (auto i : kept)
      train_set.push_back(records[i]);
    for (auto i : held) {
      val_set.push_back(records[i]);
      result.validation_ids.push_back(records[i].id);
    }
  } else {
    train_set = records;
  }
  if (train_set.empty())
    throw ValidationError("no training records");

  const Standardization stdz = compute_standardization(train_set);
  auto items = expand_dataset<T>(train_set, cfg.n_conformers_train, stdz, mcfg.nucleus, mcfg.r_cut);
  std::vector<TrainItem<T>> val_items;
  if (!val_set.empty())
    val_items = expand_dataset<T>(val_set, cfg.n_conformers_train, stdz, mcfg.nucleus, mcfg.r_cut);

  ParamMap<T> params = init_params<T>(arch, mcfg.seed);
  AdamState<T> adam = make_adam_state(params, cfg.lr);
  PlateauSchedule plateau(cfg.lr, cfg.patience, cfg.factor);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(items.size());

  const int epochs = cfg.schedule == ScheduleKind::step ? cfg.step_epochs : cfg.max_epochs;
  long step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    if (cfg.schedule == ScheduleKind::step)
      adam.lr = step_schedule(epoch, cfg.lr, cfg.factor, cfg.step_epochs);
    const double epoch_lr = adam.lr;
    for (std::size_t i = 0; i < order.size(); ++i)
      order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    long batches = 0;
    bool capped = false;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      std::vector<const TrainItem<T> *> batch_items;
      for (std::size_t i = b; i < std::min(order.size(), b + cfg.batch_size); ++i)
        batch_items.push_back(&items[order[i]]);
      auto g = gradients(arch, params, make_batch(batch_items));
      if (cfg.clip_norm > 0)
        clip_gradients(g.grads, cfg.clip_norm);
      adam_step(params, g.grads, adam, cfg.beta1, cfg.beta2, cfg.adam_eps);
      ++step;
      loss_sum += static_cast<double>(g.loss);
      ++batches;
      if (on_step)
        on_step(step, static_cast<double>(g.loss));
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        capped = true;
        break;
      }
    }

    LogRow row;
    row.epoch = epoch;
    row.step = step;
    row.lr = epoch_lr;
    row.train_loss = batches ? loss_sum / batches : 0.0;
    bool stop = capped;
    if (cfg.schedule == ScheduleKind::plateau) {
      if (!val_items.empty()) {
        auto e = detail::validation_errors(arch, params, val_items, stdz);
        if (!std::isnan(e[0]))
          row.val_mae_C = e[0];
        if (!std::isnan(e[1]))
          row.val_mae_H = e[1];
        adam.lr = plateau.update(e[2]);
      } else {
        adam.lr = plateau.update(row.train_loss);
      }
      stop = stop || adam.lr < cfg.min_lr;
    }
    log().debug("epoch {} step {} lr {:.3g} loss {:.6g}", epoch, step, epoch_lr, row.train_loss);
    result.log.push_back(row);
    if (stop)
      break;
  }

  result.checkpoint.config = mcfg;
  result.checkpoint.standardization = stdz;
  result.checkpoint.params = std::move(params);
  result.checkpoint.metadata = {{"train_config", to_json(cfg)},
                                {"steps", step},
                                {"train_records", static_cast<int>(train_set.size())},
                                {"train_items", static_cast<int>(items.size())}};
  return result;
}

}  // namespace geqshift
