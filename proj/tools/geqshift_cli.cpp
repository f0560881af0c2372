//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

// geqshift: splits, train, predict, cv, evaluate, selfcheck, synth.
//
// Exit codes: 0 success, 1 selfcheck failure, 2 invalid input or config,
// 3 numerical abort, 4 artifact mismatch.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "geqshift.hpp"

namespace fs = std::filesystem;
using namespace geqshift;

namespace {

enum Exit { ok = 0, selfcheck_failed = 1, invalid = 2, numerical = 3, mismatch = 4 };

struct Common {
  std::string config;
  std::optional<std::string> mode;
  std::optional<std::string> dataset;
  std::optional<std::string> splits;
  std::optional<int> precision;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App *cmd, Common &c) {
  cmd->add_option("--config", c.config, "Run config JSON file")->check(CLI::ExistingFile);
  cmd->add_option("--mode", c.mode, "Ablation preset (overrides the config file)");
  cmd->add_option("--dataset", c.dataset, "Dataset JSONL (overrides the config file)");
  cmd->add_option("--splits", c.splits, "Splits JSON (overrides the config file)");
  cmd->add_option("--precision", c.precision, "Scalar width, 32 or 64")->check(CLI::IsMember({32, 64}));
  cmd->add_option("--seed", c.seed, "Seed for initialization, shuffling and splits");
}

RunConfig resolve(const Common &c) {
  RunConfig rc;
  if (!c.config.empty())
    rc = load_run_config(c.config);
  if (c.mode) {
    rc.mode = *c.mode;
    find_mode(*c.mode);
  }
  if (c.dataset)
    rc.dataset = *c.dataset;
  if (c.splits)
    rc.splits = *c.splits;
  if (c.precision)
    rc.precision = parse_precision(*c.precision);
  if (c.seed)
    rc.seed = *c.seed;
  rc.resolve();
  rc.validate();
  return rc;
}

std::vector<MoleculeRecord> require_dataset(const RunConfig &rc) {
  if (rc.dataset.empty())
    throw ConfigError("no dataset given (--dataset or \"dataset\" in the config)");
  return load_dataset(rc.dataset);
}

void write_file(const fs::path &path, const std::string &text) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out)
    throw ValidationError("cannot write " + path.string());
}

std::string config_key_help() {
  RunConfig rc;
  std::string out = "Config file keys (defaults):\n";
  auto j = to_json(rc);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it->is_object()) {
      for (auto jt = it->begin(); jt != it->end(); ++jt)
        out += fmt::format("  {}.{} = {}\n", it.key(), jt.key(), jt->dump());
    } else {
      out += fmt::format("  {} = {}\n", it.key(), it->dump());
    }
  }
  out += "Modes (l_max, train conformers, test conformers):\n";
  for (const auto &m : mode_presets)
    out += fmt::format("  {} = ({}, {}, {})\n", m.name, m.l_max, m.n_conformers_train,
                       m.n_conformers_test);
  return out;
}

// ---- train ----------------------------------------------------------------

template <class T> int run_train(const RunConfig &rc, std::optional<int> fold, const fs::path &out) {
  auto data = require_dataset(rc);
  std::vector<MoleculeRecord> train_set;
  if (fold) {
    if (rc.splits.empty())
      throw ConfigError("--fold needs a splits file");
    auto s = load_splits(rc.splits);
    if (*fold < 0 || *fold >= static_cast<int>(s.folds.size()))
      throw ValidationError("fold " + std::to_string(*fold) + " out of range");
    std::set<std::string> ids(s.folds[*fold].train.begin(), s.folds[*fold].train.end());
    for (auto &r : data)
      if (ids.count(r.id))
        train_set.push_back(std::move(r));
    if (train_set.size() != ids.size())
      throw ValidationError("splits file names molecules missing from the dataset");
  } else {
    train_set = std::move(data);
  }
  auto result = train<T>(train_set, rc.train, rc.model);
  result.checkpoint.metadata["run_config"] = to_json(rc);
  if (fold)
    result.checkpoint.metadata["fold"] = *fold;
  fs::create_directories(out);
  save_checkpoint(result.checkpoint, out / "checkpoint");
  write_file(out / "train_log.csv", log_csv(result.log));
  write_file(out / "run_config.json", to_json(rc).dump(2) + "\n");
  log().info("trained {} epochs; checkpoint written to {}", result.log.size(),
             (out / "checkpoint").string());
  return ok;
}

// ---- predict --------------------------------------------------------------

template <class T>
int run_predict(const std::vector<std::string> &paths, const std::string &molecules,
                int n_conformers, const fs::path &out, const std::string &values_out) {
  std::vector<Checkpoint<T>> cks;
  for (const auto &p : paths)
    cks.push_back(load_checkpoint<T>(p));
  std::vector<const Checkpoint<T> *> ptrs;
  for (const auto &c : cks)
    ptrs.push_back(&c);
  require_compatible(ptrs);
  auto records = load_dataset(molecules);
  std::string text =
      "id,class,atom_index,nucleus,true_ppm,pred_mean_ppm,pred_std_ppm,error_ppm,n_values\n";
  std::string values = "id,atom_index,nucleus,sample,value_ppm\n";
  for (const auto &r : records) {
    for (const auto &p : predict_multi_model(r, ptrs, first_conformers(r, n_conformers))) {
      const std::string truth = p.true_ppm ? csv::number(*p.true_ppm) : "";
      const std::string err = p.true_ppm ? csv::number(p.mean_ppm - *p.true_ppm) : "";
      text += fmt::format("{},{},{},{},{},{},{},{},{}\n", csv::field(r.id),
                          to_string(r.saccharide_class), p.atom_index, to_string(p.nucleus), truth,
                          csv::number(p.mean_ppm), csv::number(p.std_ppm), err, p.values.size());
      for (std::size_t i = 0; i < p.values.size(); ++i)
        values += fmt::format("{},{},{},{},{}\n", csv::field(r.id), p.atom_index,
                              to_string(p.nucleus), i, csv::number(p.values[i]));
    }
  }
  if (out.empty())
    std::cout << text;
  else
    write_file(out, text);
  if (!values_out.empty())
    write_file(values_out, values);
  return ok;
}

// ---- cv -------------------------------------------------------------------

template <class T>
int run_cv_cmd(const RunConfig &rc, const fs::path &out, int parallel, const std::vector<int> &only) {
  auto data = require_dataset(rc);
  Splits splits;
  if (rc.splits.empty()) {
    const std::uint64_t seed = rc.seed.value_or(0);
    log().warn("no splits file given; generating 10 stratified folds with seed {}", seed);
    splits = stratified_kfold(data, 10, seed);
    fs::create_directories(out);
    save_splits(splits, out / "splits.json");
  } else {
    splits = load_splits(rc.splits);
  }
  CvOptions opt;
  opt.test_n_conformers = rc.n_conformers_test;
  opt.parallel_folds = parallel;
  opt.out_dir = out;
  opt.only_folds = only;
  fs::create_directories(out);
  write_file(out / "run_config.json", to_json(rc).dump(2) + "\n");
  auto report = run_cv<T>(data, splits, rc.model, rc.train, opt);
  for (const auto &[key, cell] : report.aggregate)
    std::cout << fmt::format("{:<16} MAE {:.4f} ({:.4f})  RMSE {:.4f} ({:.4f})  n={}\n",
                             cell_name(key), cell.mae_mean, cell.mae_std, cell.rmse_mean,
                             cell.rmse_std, cell.n);
  return ok;
}

// ---- evaluate -------------------------------------------------------------

int run_evaluate(const fs::path &dir, bool check) {
  std::vector<FoldReport> folds;
  std::vector<PredictionRow> rows;
  std::vector<std::pair<int, fs::path>> files;
  for (const auto &e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_directory() && name.rfind("fold_", 0) == 0 && fs::exists(e.path() / "predictions.csv"))
      files.emplace_back(std::stoi(name.substr(5)), e.path() / "predictions.csv");
  }
  if (files.empty())
    throw ValidationError("no fold_<i>/predictions.csv under " + dir.string());
  std::sort(files.begin(), files.end());
  for (const auto &[f, path] : files) {
    auto r = read_predictions_csv(path);
    folds.push_back({f, metrics(r)});
    rows.insert(rows.end(), r.begin(), r.end());
  }
  CvReport report;
  report.folds = folds;
  report.rows = rows;
  report.aggregate = aggregate_folds(folds);
  report.pooled = metrics(rows);
  const auto recomputed = to_json(report);
  if (!check) {
    std::cout << recomputed.dump(2) << "\n";
    return ok;
  }
  std::ifstream in(dir / "report.json");
  if (!in)
    throw ValidationError("missing " + (dir / "report.json").string());
  const auto stored = nlohmann::json::parse(in);
  if (stored != recomputed) {
    std::cerr << "report.json differs from metrics recomputed from the fold CSVs\n";
    return mismatch;
  }
  std::cout << "report.json matches the fold CSVs\n";
  return ok;
}

// ---- selfcheck ------------------------------------------------------------

int run_selfcheck_cmd(bool inject_fault) {
  const CGTable faulty = CGTable::global().perturbed(1, 1, 2, 4, -1.0);
  const CGTable &table = inject_fault ? faulty : CGTable::global();
  if (inject_fault)
    std::cout << "note: coupling table corrupted on purpose (sign flip in block (1,1,2))\n";
  bool all = true;
  std::cout << fmt::format("{:<20} {:>12} {:>10} {:>9}  {}\n", "check", "worst", "tolerance",
                           "seconds", "result");
  for (const auto &r : run_selfcheck(table)) {
    all = all && r.pass();
    std::cout << fmt::format("{:<20} {:>12.3e} {:>10.1e} {:>9.2f}  {}  {}\n", r.name, r.value,
                             r.tolerance, r.seconds, r.pass() ? "PASS" : "FAIL", r.detail);
  }
  std::cout << (all ? "all checks passed\n" : "selfcheck FAILED\n");
  return all ? ok : selfcheck_failed;
}

template <class F> int dispatch(Precision p, F &&f) {
  return p == Precision::f32 ? f(float{}) : f(double{});
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Equivariant graph attention for carbohydrate NMR chemical shifts"};
  app.footer(config_key_help());
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  // splits
  auto *splits_cmd = app.add_subcommand("splits", "Write stratified k-fold splits");
  std::string splits_data, splits_out;
  int splits_k = 10;
  std::uint64_t splits_seed = 0;
  splits_cmd->add_option("--data", splits_data, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  splits_cmd->add_option("--k", splits_k, "Number of folds")->capture_default_str();
  splits_cmd->add_option("--seed", splits_seed, "Shuffle seed")->capture_default_str();
  splits_cmd->add_option("--out", splits_out, "Output JSON")->required();

  // train
  auto *train_cmd = app.add_subcommand("train", "Train one model (one fold or the whole dataset)");
  Common train_common;
  add_common(train_cmd, train_common);
  std::optional<int> train_fold;
  std::string train_out;
  train_cmd->add_option("--fold", train_fold, "Train on this fold's training ids");
  train_cmd->add_option("--out", train_out, "Output directory")->required();

  // predict
  auto *predict_cmd = app.add_subcommand("predict", "Ensemble (and multi-model) prediction");
  std::vector<std::string> predict_cks;
  std::string predict_mols, predict_out, predict_values;
  int predict_n = 100;
  std::optional<int> predict_precision;
  predict_cmd->add_option("--checkpoints", predict_cks, "One or more checkpoints")
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--molecules", predict_mols, "Molecules JSONL")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--n-conformers", predict_n, "Conformers per molecule")->capture_default_str();
  predict_cmd->add_option("--out", predict_out, "Output CSV (stdout when absent)");
  predict_cmd->add_option("--values-out", predict_values, "Per-conformer values CSV");
  predict_cmd->add_option("--precision", predict_precision, "Scalar width, 32 or 64")
      ->check(CLI::IsMember({32, 64}));

  // cv
  auto *cv_cmd = app.add_subcommand("cv", "Cross-validation with report and exports");
  Common cv_common;
  add_common(cv_cmd, cv_common);
  std::string cv_out;
  int cv_parallel = 1;
  std::vector<int> cv_only;
  cv_cmd->add_option("--out", cv_out, "Output directory")->required();
  cv_cmd->add_option("--parallel-folds", cv_parallel, "Folds trained concurrently")->capture_default_str();
  cv_cmd->add_option("--folds", cv_only, "Run only these fold indices");

  // evaluate
  auto *eval_cmd = app.add_subcommand("evaluate", "Recompute metrics from a cv output directory");
  std::string eval_dir;
  bool eval_check = false;
  eval_cmd->add_option("--cv-dir", eval_dir, "cv output directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_flag("--check", eval_check, "Compare against report.json (exit 4 on mismatch)");

  // selfcheck
  auto *self_cmd = app.add_subcommand("selfcheck", "Coupling-table, equivariance and gradient checks");
  bool inject = false;
  self_cmd->add_flag("--inject-cg-fault", inject, "Corrupt one coupling coefficient first");

  // synth
  auto *synth_cmd = app.add_subcommand("synth", "Write a synthetic labeled dataset");
  int synth_per_class = 20, synth_conformers = 3;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth_cmd->add_option("--per-class", synth_per_class, "Molecules per class")->capture_default_str();
  synth_cmd->add_option("--conformers", synth_conformers, "Conformers per molecule")->capture_default_str();
  synth_cmd->add_option("--seed", synth_seed, "Seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output JSONL")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? ok : invalid;
  }
  log().set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (*splits_cmd) {
      auto s = stratified_kfold(load_dataset(splits_data), splits_k, splits_seed);
      save_splits(s, splits_out);
      return ok;
    }
    if (*train_cmd) {
      const auto rc = resolve(train_common);
      return dispatch(rc.precision, [&](auto t) {
        return run_train<decltype(t)>(rc, train_fold, train_out);
      });
    }
    if (*predict_cmd) {
      const auto p = parse_precision(predict_precision.value_or(64));
      return dispatch(p, [&](auto t) {
        return run_predict<decltype(t)>(predict_cks, predict_mols, predict_n, predict_out,
                                        predict_values);
      });
    }
    if (*cv_cmd) {
      const auto rc = resolve(cv_common);
      return dispatch(rc.precision, [&](auto t) {
        return run_cv_cmd<decltype(t)>(rc, cv_out, cv_parallel, cv_only);
      });
    }
    if (*eval_cmd)
      return run_evaluate(eval_dir, eval_check);
    if (*self_cmd)
      return run_selfcheck_cmd(inject);
    if (*synth_cmd) {
      SyntheticOptions so;
      so.conformers = synth_conformers;
      save_dataset(synthetic_dataset(synth_per_class, synth_seed, {SaccharideClass::mono,
                                                                   SaccharideClass::di,
                                                                   SaccharideClass::tri},
                                     so),
                   synth_out);
      return ok;
    }
  } catch (const MismatchError &e) {
    log().error("{}", e.what());
    return mismatch;
  } catch (const NumericalError &e) {
    log().error("{}", e.what());
    return numerical;
  } catch (const std::exception &e) {
    log().error("{}", e.what());
    return invalid;
  }
  return ok;
}
