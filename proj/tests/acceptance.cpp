//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Set GEQSHIFT_DATASET (and optionally GEQSHIFT_SPLITS) to
// also run the full-size cross-validation comparison.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include "geqshift.hpp"

using namespace geqshift;

namespace {

struct Outcome {
  std::string name;
  bool pass = false;
  bool skipped = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<Outcome> outcomes;

template <class F> void criterion(const std::string &name, F &&body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  o.name = name;
  try {
    body(o);
  } catch (const std::exception &e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s  %-22s %7.1fs  %s\n", o.skipped ? "SKIP" : (o.pass ? "PASS" : "FAIL"),
              o.name.c_str(), o.seconds, o.detail.c_str());
  std::fflush(stdout);
  outcomes.push_back(o);
}

std::string fmt_check(const CheckResult &r) {
  return fmt::format("{}={:.3g} (tol {:.0e})", r.name, r.value, r.tolerance);
}

std::string read_bytes(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::filesystem::path scratch(const std::string &name) {
  auto p = std::filesystem::temp_directory_path() / "geqshift_acceptance" / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Small model used wherever a criterion concerns plumbing rather than
/// accuracy.
ModelConfig small_model(int l_max) {
  ModelConfig c;
  c.n_layers = 2;
  c.hidden_sig = "8x0e+4x1o+2x2e";
  c.l_max = l_max;
  c.node_emb_dim = 16;
  c.edge_emb_dim = 8;
  c.readout_scalar_dim = 8;
  c.readout_hidden = 16;
  c.weight_nn_hidden = 8;
  c.seed = 7;
  return c;
}

std::vector<MoleculeRecord> corpus(int per_class, int conformers, int max_atoms, std::uint64_t seed,
                                   double jitter = 0.05) {
  SyntheticOptions o;
  o.conformers = conformers;
  o.max_atoms = max_atoms;
  o.jitter = jitter;
  return synthetic_dataset(per_class, seed,
                           {SaccharideClass::mono, SaccharideClass::di, SaccharideClass::tri}, o);
}

// ---------------------------------------------------------------------------

void equivariance() {
  criterion("equivariance", [](Outcome &o) {
    ModelConfig cfg;  // full-size default model
    auto stdz = compute_standardization(corpus(20, 1, 30, 99));
    EquivarianceOptions opt;  // 20 molecules x 10 rotations, 5-30 atoms, 1e-8
    opt.ppm_scale = {stdz.std[0], stdz.std[1]};
    auto rs = check_model_equivariance(CGTable::global(), cfg, opt);
    o.pass = true;
    for (const auto &r : rs) {
      o.pass = o.pass && r.pass();
      o.detail += fmt_check(r) + " ";
    }
  });
}

void cg_sh_oracle() {
  criterion("cg_sh_oracle", [](Outcome &o) {
    const auto &t = CGTable::global();
    std::vector<CheckResult> rs{check_cg_oracle(t, 1e-12), check_cg_vector_products(t, 5, 1e-12),
                                check_sh_equivariance(t, 100, 11, 1e-12)};
    o.pass = true;
    for (const auto &r : rs) {
      o.pass = o.pass && r.pass();
      o.detail += fmt_check(r) + " ";
    }
  });
}

void gradient_check() {
  criterion("gradient_check", [](Outcome &o) {
    GradcheckOptions g;  // 6 atoms, h = 1e-5, 1e-4
    auto r2 = check_gradients(CGTable::global(), gradcheck_config(2), g);
    auto r0 = check_gradients(CGTable::global(), gradcheck_config(0), g);
    o.pass = r2.pass() && r0.pass();
    o.detail = fmt_check(r2) + " " + fmt_check(r0);
  });
}

void overfit() {
  criterion("overfit", [](Outcome &o) {
    SyntheticOptions so;
    so.conformers = 1;
    std::vector<MoleculeRecord> recs;
    for (int i = 0; i < 10; ++i)
      recs.push_back(synthetic_molecule("ovf-" + std::to_string(i), SaccharideClass(i % 3),
                                        100 + i, so));
    ModelConfig mc;
    mc.n_layers = 2;
    mc.hidden_sig = "16x0e+8x1o+4x2e";
    mc.node_emb_dim = 32;
    mc.readout_scalar_dim = 16;
    mc.readout_hidden = 16;
    mc.weight_nn_hidden = 16;
    mc.seed = 1;
    TrainConfig tc;
    tc.schedule = ScheduleKind::constant;
    tc.lr = 3e-4;
    tc.batch_size = 32;  // whole set in one batch: one step per epoch
    tc.max_epochs = 2000;
    tc.n_conformers_train = 1;
    tc.seed = 1;
    auto res = train<double>(recs, tc, mc);
    const long steps = res.checkpoint.metadata["steps"].get<long>();

    Architecture arch(mc);
    const auto &s = res.checkpoint.standardization;
    std::vector<double> err[2], truth[2];
    for (const auto &r : recs) {
      auto out = forward(build_graph(r, 0), res.checkpoint.params, arch);
      for (const auto &l : r.labels) {
        const int c = static_cast<int>(l.nucleus);
        err[c].push_back(std::abs(s.destandardize(out(l.atom_index, c), l.nucleus) - l.shift_ppm));
        truth[c].push_back(l.shift_ppm);
      }
    }
    double worst = 0.0;
    for (int c = 0; c < 2; ++c) {
      const double ratio = mean_of(err[c]) / population_std(truth[c]);
      worst = std::max(worst, ratio);
      o.detail += fmt::format("{}: MAE/std={:.4f} ", c == 0 ? "C" : "H", ratio);
    }
    o.detail += fmt::format("steps={} (tol 0.01)", steps);
    o.pass = steps == 2000 && worst < 0.01;
  });
}

void ensemble_bound() {
  criterion("ensemble_bound", [](Outcome &o) {
    auto data = corpus(4, 10, 20, 41, 0.25);
    TrainConfig tc;
    tc.n_conformers_train = 10;
    tc.seed = 3;
    auto ck = train<double>(data, tc, small_model(2)).checkpoint;
    double worst = -std::numeric_limits<double>::infinity();
    long checked = 0;
    for (const auto &r : data)
      for (const auto &p : predict_ensemble(r, ck, 10)) {
        double rhs = 0.0;
        for (double v : p.values)
          rhs += std::abs(*p.true_ppm - v);
        rhs /= static_cast<double>(p.values.size());
        worst = std::max(worst, std::abs(*p.true_ppm - p.mean_ppm) - rhs);
        ++checked;
      }
    o.pass = worst <= 1e-12;
    o.detail = fmt::format("max(|t-mean| - mean|t-p|)={:.3g} over {} nuclei (tol 1e-12)", worst,
                           checked);
  });
}

void ablation_grid() {
  criterion("ablation_grid", [](Outcome &o) {
    auto data = corpus(2, 100, 10, 8);
    std::set<std::tuple<int, int, int>> seen;
    std::string bad;
    double mirror = 0.0;
    bool structural = true;
    for (const auto &preset : mode_presets) {
      RunConfig rc;
      nlohmann::json j = {{"mode", preset.name}};
      update_from_json(rc, j);
      rc.model = small_model(2);  // resolve() applies the preset's l_max
      rc.train.max_steps = 2;
      rc.resolve();
      rc.validate();
      auto res = train<double>(data, rc.train, rc.model);
      const auto &ck = res.checkpoint;
      const int train_conf = ck.metadata["train_items"].get<int>() /
                             ck.metadata["train_records"].get<int>();
      std::set<std::size_t> test_conf;
      for (const auto &r : data)
        for (const auto &p : predict_ensemble(r, ck, rc.n_conformers_test))
          test_conf.insert(p.values.size());
      if (test_conf.size() != 1) {
        bad += std::string(preset.name) + ": uneven test conformers; ";
        continue;
      }
      std::tuple<int, int, int> got{ck.config.l_max, train_conf, static_cast<int>(*test_conf.begin())};
      std::tuple<int, int, int> want{std::string(preset.name).find("_inv") != std::string::npos ? 0 : 2,
                                     std::string(preset.name).find("1TT") != std::string::npos ? 1 : 100,
                                     std::string(preset.name).find("1T") != std::string::npos ? 1 : 100};
      if (got != want)
        bad += fmt::format("{}: got ({},{},{}); ", preset.name, std::get<0>(got), std::get<1>(got),
                           std::get<2>(got));
      seen.insert(got);

      if (ck.config.l_max == 0) {
        Architecture arch(ck.config);
        for (const auto &sig : arch.layer_signatures())
          for (const auto &e : sig.entries())
            structural = structural && e.ir.l == 0;
        structural = structural && arch.sh().dim() == 1;
        for (const auto &r : data) {
          std::vector<Matrix<double>> states;
          forward(build_graph(r, 0), ck.params, arch, &states);
          for (const auto &s : states)
            structural = structural && s.cols == arch.hidden().dim() &&
                         arch.hidden().dim() == arch.hidden().num_channels();
          auto mirrored = r;
          for (auto &conf : mirrored.conformers)
            for (auto &x : conf)
              x[0] = -x[0];
          auto a = predict_ensemble(r, ck, rc.n_conformers_test);
          auto b = predict_ensemble(mirrored, ck, rc.n_conformers_test);
          for (std::size_t i = 0; i < a.size(); ++i)
            mirror = std::max(mirror, std::abs(a[i].mean_ppm - b[i].mean_ppm));
        }
      }
    }
    const bool grid = seen.size() == 6 && bad.empty();
    o.pass = grid && structural && mirror <= 1e-8;
    o.detail = fmt::format("distinct triples={} structural_l0={} mirror_diff={:.3g} ppm (tol 1e-8) {}",
                           seen.size(), structural, mirror, bad);
  });
}

/// Cross-validation on the 60-molecule corpus; returns the output directory.
std::filesystem::path run_small_cv(const std::string &name, int parallel) {
  auto data = corpus(20, 3, 16, 60);
  auto splits = stratified_kfold(data, 10, 5);
  TrainConfig tc;
  tc.n_conformers_train = 3;
  tc.seed = 5;
  CvOptions opt;
  opt.test_n_conformers = 3;
  opt.parallel_folds = parallel;
  opt.out_dir = scratch(name);
  save_splits(splits, *opt.out_dir / "splits.json");
  run_cv<double>(data, splits, small_model(2), tc, opt);
  return *opt.out_dir;
}

std::filesystem::path cv_dir;

void cv_protocol() {
  criterion("cv_protocol", [](Outcome &o) {
    cv_dir = run_small_cv("cv_a", 1);
    auto data = corpus(20, 3, 16, 60);
    std::map<std::string, SaccharideClass> cls;
    for (const auto &r : data)
      cls[r.id] = r.saccharide_class;
    auto splits = load_splits(cv_dir / "splits.json");

    std::map<std::string, int> tested;
    bool counts_ok = splits.folds.size() == 10;
    std::vector<FoldReport> folds;
    std::vector<PredictionRow> all;
    for (std::size_t f = 0; f < splits.folds.size(); ++f) {
      int per[3] = {0, 0, 0};
      for (const auto &id : splits.folds[f].test) {
        ++tested[id];
        ++per[static_cast<int>(cls.at(id))];
      }
      counts_ok = counts_ok && per[0] == 2 && per[1] == 2 && per[2] == 2;
      auto rows = read_predictions_csv(cv_dir / ("fold_" + std::to_string(f)) / "predictions.csv");
      std::set<std::string> ids;
      for (const auto &r : rows)
        ids.insert(r.id);
      counts_ok = counts_ok && ids == std::set<std::string>(splits.folds[f].test.begin(),
                                                            splits.folds[f].test.end());
      folds.push_back({static_cast<int>(f), metrics(rows)});
      all.insert(all.end(), rows.begin(), rows.end());
    }
    bool once = tested.size() == data.size();
    for (const auto &[id, n] : tested)
      once = once && n == 1;

    CvReport recomputed;
    recomputed.folds = folds;
    recomputed.aggregate = aggregate_folds(folds);
    recomputed.pooled = metrics(all);
    const auto stored = nlohmann::json::parse(read_bytes(cv_dir / "report.json"));
    const bool same = to_json(recomputed) == stored;

    bool mae_le_rmse = true;
    auto check = [&](const CellTable &t) {
      for (const auto &[k, m] : t)
        mae_le_rmse = mae_le_rmse && m.mae <= m.rmse;
    };
    for (const auto &f : folds)
      check(f.cells);
    check(recomputed.pooled);
    for (const auto &[k, a] : recomputed.aggregate)
      mae_le_rmse = mae_le_rmse && a.mae_mean <= a.rmse_mean;

    o.pass = once && counts_ok && mae_le_rmse && same;
    o.detail = fmt::format("each_test_once={} class_counts_2={} mae_le_rmse={} csv_equals_report={}",
                           once, counts_ok, mae_le_rmse, same);
  });
}

void reproducibility() {
  criterion("reproducibility", [](Outcome &o) {
    if (cv_dir.empty())
      cv_dir = run_small_cv("cv_a", 1);
    auto other = run_small_cv("cv_b", 2);
    int compared = 0, differing = 0;
    for (const auto &rel : std::vector<std::string>{"report.json", "splits.json"}) {
      ++compared;
      differing += read_bytes(cv_dir / rel) != read_bytes(other / rel);
    }
    for (int f = 0; f < 10; ++f)
      for (const char *file : {"checkpoint", "predictions.csv", "train_log.csv"}) {
        const auto rel = std::filesystem::path("fold_" + std::to_string(f)) / file;
        ++compared;
        differing += read_bytes(cv_dir / rel) != read_bytes(other / rel);
      }
    o.pass = differing == 0;
    o.detail = fmt::format("{} files compared, {} differ (second run used 2 threads)", compared,
                           differing);
  });
}

// Ten-fold mean MAE of the full model on the reference dataset, [nucleus][class].
constexpr double kRefGeqShift[2][3] = {{0.31, 0.23, 0.30}, {0.035, 0.026, 0.033}};

void real_dataset() {
  const char *path = std::getenv("GEQSHIFT_DATASET");
  criterion("real_dataset", [path](Outcome &o) {
    if (!path) {
      o.skipped = o.pass = true;
      o.detail = "GEQSHIFT_DATASET not set";
      return;
    }
    auto data = load_dataset(path);
    const char *sp = std::getenv("GEQSHIFT_SPLITS");
    auto splits = sp ? load_splits(sp) : stratified_kfold(data, 10, 0);
    auto run = [&](const char *mode) {
      RunConfig rc;
      rc.mode = mode;
      rc.resolve();
      CvOptions opt;
      opt.test_n_conformers = rc.n_conformers_test;
      opt.out_dir = scratch(std::string("real_") + mode);
      return run_cv<double>(data, splits, rc.model, rc.train, opt);
    };
    auto full = run("GeqShift");
    auto single = run("GeqShift_1TT");
    bool within = true, ordered = true;
    for (int n = 0; n < 2; ++n)
      for (int c = 0; c < 3; ++c) {
        const CellKey k{static_cast<Nucleus>(n), static_cast<SaccharideClass>(c)};
        const double got = full.aggregate.at(k).mae_mean;
        within = within && std::abs(got - kRefGeqShift[n][c]) <= 0.5 * kRefGeqShift[n][c];
        o.detail += fmt::format("{}={:.3f} ", cell_name(k), got);
        if (n == 0)
          ordered = ordered && got < single.aggregate.at(k).mae_mean;
      }
    o.pass = within && ordered;
    o.detail += fmt::format("within_50pct={} beats_1TT_on_C={}", within, ordered);
  });
}

}  // namespace

int main() {
  log().set_level(spdlog::level::warn);
  equivariance();
  cg_sh_oracle();
  gradient_check();
  overfit();
  ensemble_bound();
  ablation_grid();
  cv_protocol();
  reproducibility();
  real_dataset();
  int failed = 0;
  for (const auto &o : outcomes)
    failed += !o.pass;
  std::printf("%d of %zu criteria failed\n", failed, outcomes.size());
  return failed == 0 ? 0 : 1;
}
