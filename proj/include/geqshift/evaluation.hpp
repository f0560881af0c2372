//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "geqshift/csv.hpp"
#include "geqshift/folds.hpp"
#include "geqshift/prediction.hpp"
#include "geqshift/training.hpp"

namespace geqshift {

struct PredictionRow {
  std::string id;
  SaccharideClass saccharide_class = SaccharideClass::mono;
  int atom_index = 0;
  Nucleus nucleus = Nucleus::C13;
  double true_ppm = 0.0;
  double pred_mean_ppm = 0.0;
  double pred_std_ppm = 0.0;
  int fold = 0;
  std::vector<double> values;  // per-conformer predictions; not part of the CSV

  double error() const { return pred_mean_ppm - true_ppm; }
};

struct CellMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  long n = 0;
};

using CellKey = std::pair<Nucleus, SaccharideClass>;
using CellTable = std::map<CellKey, CellMetrics>;

inline std::string cell_name(const CellKey &k) {
  return to_string(k.first) + "/" + to_string(k.second);
}

/// MAE and RMSE per (nucleus, class) cell. Absolute and squared errors are
/// sorted before summation, so the result does not depend on row order.
/// Cells without rows are absent.
inline CellTable metrics(const std::vector<PredictionRow> &rows) {
  std::map<CellKey, std::vector<double>> errors;
  for (const auto &r : rows)
    errors[{r.nucleus, r.saccharide_class}].push_back(r.error());
  CellTable out;
  for (auto &[key, e] : errors) {
    std::vector<double> abs(e.size()), sq(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
      abs[i] = std::abs(e[i]);
      sq[i] = e[i] * e[i];
    }
    std::sort(abs.begin(), abs.end());
    std::sort(sq.begin(), sq.end());
    double sa = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      sa += abs[i];
      ss += sq[i];
    }
    const double n = static_cast<double>(e.size());
    out[key] = {sa / n, std::sqrt(ss / n), static_cast<long>(e.size())};
  }
  return out;
}

struct FoldReport {
  int fold = 0;
  CellTable cells;
};

/// Mean and population std over folds of a cell's per-fold metrics.
struct AggregateCell {
  double mae_mean = 0.0, mae_std = 0.0;
  double rmse_mean = 0.0, rmse_std = 0.0;
  int folds = 0;
  long n = 0;
};

struct CvReport {
  std::vector<FoldReport> folds;
  std::map<CellKey, AggregateCell> aggregate;
  CellTable pooled;
  std::vector<PredictionRow> rows;
};

inline std::map<CellKey, AggregateCell> aggregate_folds(const std::vector<FoldReport> &folds) {
  std::map<CellKey, std::vector<CellMetrics>> per_cell;
  for (const auto &f : folds)
    for (const auto &[k, m] : f.cells)
      per_cell[k].push_back(m);
  std::map<CellKey, AggregateCell> out;
  for (const auto &[k, ms] : per_cell) {
    std::vector<double> mae, rmse;
    AggregateCell a;
    for (const auto &m : ms) {
      mae.push_back(m.mae);
      rmse.push_back(m.rmse);
      a.n += m.n;
    }
    a.mae_mean = mean_of(mae);
    a.mae_std = population_std(mae);
    a.rmse_mean = mean_of(rmse);
    a.rmse_std = population_std(rmse);
    a.folds = static_cast<int>(ms.size());
    out[k] = a;
  }
  return out;
}

inline nlohmann::json to_json(const CellTable &t) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto &[k, m] : t)
    j[to_string(k.first)][to_string(k.second)] = {{"mae", m.mae}, {"rmse", m.rmse}, {"n", m.n}};
  return j;
}

inline nlohmann::json to_json(const CvReport &r) {
  nlohmann::json j;
  j["folds"] = nlohmann::json::array();
  for (const auto &f : r.folds)
    j["folds"].push_back({{"fold", f.fold}, {"cells", to_json(f.cells)}});
  nlohmann::json agg = nlohmann::json::object();
  for (const auto &[k, a] : r.aggregate)
    agg[to_string(k.first)][to_string(k.second)] = {
        {"mae_mean", a.mae_mean}, {"mae_std", a.mae_std},   {"rmse_mean", a.rmse_mean},
        {"rmse_std", a.rmse_std}, {"folds", a.folds},       {"n", a.n}};
  j["aggregate"] = agg;
  j["pooled"] = to_json(r.pooled);
  return j;
}

inline const char *predictions_header =
    "id,class,atom_index,nucleus,true_ppm,pred_mean_ppm,pred_std_ppm,fold";

inline std::string predictions_csv(const std::vector<PredictionRow> &rows) {
  std::string out = std::string(predictions_header) + "\n";
  for (const auto &r : rows)
    out += csv::field(r.id) + "," + to_string(r.saccharide_class) + "," +
           std::to_string(r.atom_index) + "," + to_string(r.nucleus) + "," +
           csv::number(r.true_ppm) + "," + csv::number(r.pred_mean_ppm) + "," +
           csv::number(r.pred_std_ppm) + "," + std::to_string(r.fold) + "\n";
  return out;
}

inline std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  if (line != predictions_header)
    throw ParseError(path.string() + ": unexpected header");
  std::vector<PredictionRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty())
      continue;
    auto f = csv::split_line(line);
    if (f.size() != 8)
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 8 fields");
    PredictionRow r;
    r.id = f[0];
    r.saccharide_class = parse_saccharide_class(f[1]);
    r.atom_index = std::stoi(f[2]);
    r.nucleus = parse_nucleus(f[3]);
    r.true_ppm = csv::parse_double(f[4]);
    r.pred_mean_ppm = csv::parse_double(f[5]);
    r.pred_std_ppm = csv::parse_double(f[6]);
    r.fold = std::stoi(f[7]);
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace detail {

inline void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out)
    throw ValidationError("error writing " + path.string());
}

inline std::string safe_file_name(const std::string &id) {
  std::string out;
  for (char c : id)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  return out;
}

}  // namespace detail

/// Counts of errors in bins [k*width, (k+1)*width) from the lowest to the
/// highest occupied bin.
inline std::vector<std::pair<long, long>> error_histogram(const std::vector<double> &errors,
                                                          double width) {
  std::map<long, long> counts;
  for (double e : errors)
    ++counts[static_cast<long>(std::floor(e / width))];
  std::vector<std::pair<long, long>> out;
  if (counts.empty())
    return out;
  for (long k = counts.begin()->first; k <= counts.rbegin()->first; ++k)
    out.push_back({k, counts.count(k) ? counts[k] : 0});
  return out;
}

inline double histogram_bin_width(Nucleus n) { return n == Nucleus::C13 ? 0.1 : 0.01; }

/// Writes errors_<C|H>.csv (true vs predicted), histogram_<C|H>.csv,
/// ensemble_values/<id>.csv and error_summary.json into `dir`. A nucleus
/// without rows gets no files.
inline void export_error_data(const std::vector<PredictionRow> &rows,
                              const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json summary = nlohmann::json::object();
  for (Nucleus nuc : {Nucleus::C13, Nucleus::H1}) {
    const std::string tag = to_string(nuc);
    std::vector<const PredictionRow *> sel;
    for (const auto &r : rows)
      if (r.nucleus == nuc)
        sel.push_back(&r);
    if (sel.empty()) {
      log().warn("no {} predictions; skipping its error files", tag);
      continue;
    }
    std::string scatter = "id,class,atom_index,fold,true_ppm,pred_mean_ppm,pred_std_ppm,error_ppm\n";
    std::vector<double> errors;
    for (const auto *r : sel) {
      scatter += csv::field(r->id) + "," + to_string(r->saccharide_class) + "," +
                 std::to_string(r->atom_index) + "," + std::to_string(r->fold) + "," +
                 csv::number(r->true_ppm) + "," + csv::number(r->pred_mean_ppm) + "," +
                 csv::number(r->pred_std_ppm) + "," + csv::number(r->error()) + "\n";
      errors.push_back(r->error());
    }
    detail::write_text(dir / ("errors_" + tag + ".csv"), scatter);

    const double width = histogram_bin_width(nuc);
    std::string hist = "bin_start,bin_end,count\n";
    for (auto [k, c] : error_histogram(errors, width))
      hist += csv::number(k * width) + "," + csv::number((k + 1) * width) + "," +
              std::to_string(c) + "\n";
    detail::write_text(dir / ("histogram_" + tag + ".csv"), hist);

    std::vector<double> abs;
    for (double e : errors)
      abs.push_back(std::abs(e));
    std::sort(abs.begin(), abs.end());
    double sq = 0.0;
    std::vector<double> sqs;
    for (double e : errors)
      sqs.push_back(e * e);
    std::sort(sqs.begin(), sqs.end());
    for (double v : sqs)
      sq += v;
    double sa = 0.0;
    for (double v : abs)
      sa += v;
    summary[tag] = {{"n", errors.size()},
                    {"error_mean", mean_of(errors)},
                    {"error_std", population_std(errors)},
                    {"mae", sa / errors.size()},
                    {"rmse", std::sqrt(sq / errors.size())},
                    {"histogram_bin_width", width}};
  }
  detail::write_text(dir / "error_summary.json", summary.dump(2) + "\n");

  const auto ens = dir / "ensemble_values";
  std::filesystem::create_directories(ens);
  std::map<std::string, std::vector<const PredictionRow *>> by_id;
  for (const auto &r : rows)
    by_id[r.id].push_back(&r);
  for (const auto &[id, rs] : by_id) {
    std::string text = "atom_index,nucleus,true_ppm,pred_mean_ppm,conformer,value_ppm\n";
    for (const auto *r : rs)
      for (std::size_t c = 0; c < r->values.size(); ++c)
        text += std::to_string(r->atom_index) + "," + to_string(r->nucleus) + "," +
                csv::number(r->true_ppm) + "," + csv::number(r->pred_mean_ppm) + "," +
                std::to_string(c) + "," + csv::number(r->values[c]) + "\n";
    detail::write_text(ens / (detail::safe_file_name(id) + ".csv"), text);
  }
}

inline void write_report(const CvReport &report, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  detail::write_text(dir / "report.json", to_json(report).dump(2) + "\n");
}

struct CvOptions {
  int test_n_conformers = 100;
  int parallel_folds = 1;
  std::optional<std::filesystem::path> out_dir;
  std::vector<int> only_folds;  // empty: all folds
};

template <class T>
std::vector<PredictionRow> predict_rows(const MoleculeRecord &r, const Checkpoint<T> &ck,
                                        int n_conformers, int fold) {
  std::vector<PredictionRow> rows;
  for (auto &p : predict_ensemble(r, ck, n_conformers)) {
    if (!p.true_ppm)
      continue;
    PredictionRow row;
    row.id = r.id;
    row.saccharide_class = r.saccharide_class;
    row.atom_index = p.atom_index;
    row.nucleus = p.nucleus;
    row.true_ppm = *p.true_ppm;
    row.pred_mean_ppm = p.mean_ppm;
    row.pred_std_ppm = p.std_ppm;
    row.fold = fold;
    row.values = std::move(p.values);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Cross-validation: for every fold, train on its train ids, write and
/// reload the checkpoint, and predict each test molecule from its first
/// `test_n_conformers` conformers. Folds may run on several threads; the
/// report is assembled in fold order.
template <class T>
CvReport run_cv(const std::vector<MoleculeRecord> &dataset, const Splits &splits,
                const ModelConfig &mcfg, const TrainConfig &tcfg, const CvOptions &opt = {}) {
  std::unordered_map<std::string, const MoleculeRecord *> by_id;
  for (const auto &r : dataset)
    by_id[r.id] = &r;
  auto lookup = [&](const std::vector<std::string> &ids, int fold) {
    std::vector<MoleculeRecord> out;
    for (const auto &id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end())
        throw ValidationError("fold " + std::to_string(fold) + ": unknown molecule id \"" + id + "\"");
      out.push_back(*it->second);
    }
    return out;
  };
  std::vector<int> folds = opt.only_folds;
  if (folds.empty())
    for (int f = 0; f < static_cast<int>(splits.folds.size()); ++f)
      folds.push_back(f);
  for (int f : folds)
    if (f < 0 || f >= static_cast<int>(splits.folds.size()))
      throw ValidationError("fold index " + std::to_string(f) + " out of range");
  if (opt.out_dir)
    std::filesystem::create_directories(*opt.out_dir);

  std::vector<std::vector<PredictionRow>> fold_rows(folds.size());
  auto run_fold = [&](std::size_t slot) {
    const int f = folds[slot];
    auto train_set = lookup(splits.folds[f].train, f);
    auto test_set = lookup(splits.folds[f].test, f);
    log().info("fold {}: {} train / {} test molecules", f, train_set.size(), test_set.size());
    auto result = train<T>(train_set, tcfg, mcfg);
    Checkpoint<T> ck;
    if (opt.out_dir) {
      const auto dir = *opt.out_dir / ("fold_" + std::to_string(f));
      std::filesystem::create_directories(dir);
      save_checkpoint(result.checkpoint, dir / "checkpoint");
      detail::write_text(dir / "train_log.csv", log_csv(result.log));
      ck = load_checkpoint<T>(dir / "checkpoint");
    } else {
      ck = deserialize_checkpoint<T>(serialize_checkpoint(result.checkpoint));
    }
    std::vector<PredictionRow> rows;
    for (const auto &r : test_set) {
      auto rs = predict_rows(r, ck, opt.test_n_conformers, f);
      rows.insert(rows.end(), std::make_move_iterator(rs.begin()), std::make_move_iterator(rs.end()));
    }
    if (opt.out_dir)
      detail::write_text(*opt.out_dir / ("fold_" + std::to_string(f)) / "predictions.csv",
                         predictions_csv(rows));
    fold_rows[slot] = std::move(rows);
  };

  const int workers = std::max(1, std::min<int>(opt.parallel_folds, static_cast<int>(folds.size())));
  if (workers == 1) {
    for (std::size_t s = 0; s < folds.size(); ++s)
      run_fold(s);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t s; (s = next++) < folds.size();) {
          try {
            run_fold(s);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error)
              error = std::current_exception();
          }
        }
      });
    for (auto &t : pool)
      t.join();
    if (error)
      std::rethrow_exception(error);
  }

  CvReport report;
  for (std::size_t s = 0; s < folds.size(); ++s) {
    report.folds.push_back({folds[s], metrics(fold_rows[s])});
    report.rows.insert(report.rows.end(), fold_rows[s].begin(), fold_rows[s].end());
  }
  report.aggregate = aggregate_folds(report.folds);
  report.pooled = metrics(report.rows);
  if (opt.out_dir) {
    write_report(report, *opt.out_dir);
    export_error_data(report.rows, *opt.out_dir);
  }
  return report;
}

struct ExternalRow {
  int atom_index = 0;
  Nucleus nucleus = Nucleus::C13;
  double true_ppm = 0.0;
  double pred_ppm = 0.0;
  double delta_ppm = 0.0;  // pred - true
};

struct ExternalEvaluation {
  std::vector<ExternalRow> rows;
  std::map<Nucleus, double> mae;
};

/// Multi-model prediction on a labeled record with a per-atom error table.
template <class T>
ExternalEvaluation evaluate_external(const MoleculeRecord &record,
                                     const std::vector<const Checkpoint<T> *> &cks,
                                     int n_conformers) {
  if (record.labels.empty())
    throw ValidationError("record \"" + record.id + "\" has no labels to evaluate against");
  auto preds = predict_multi_model(record, cks, first_conformers(record, n_conformers));
  ExternalEvaluation ev;
  std::map<Nucleus, std::vector<double>> abs;
  for (const auto &p : preds) {
    ExternalRow row{p.atom_index, p.nucleus, *p.true_ppm, p.mean_ppm, p.mean_ppm - *p.true_ppm};
    abs[p.nucleus].push_back(std::abs(row.delta_ppm));
    ev.rows.push_back(row);
  }
  for (auto &[n, v] : abs)
    ev.mae[n] = mean_of(v);
  return ev;
}

}  // namespace geqshift
