//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

// Property suites shared by `geqshift selfcheck` and the acceptance tests.
// Every suite takes the coupling table explicitly so that a corrupted table
// can be fed through the whole pipeline.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "geqshift/clebsch_gordan.hpp"
#include "geqshift/model.hpp"
#include "geqshift/reference.hpp"
#include "geqshift/spherical_harmonics.hpp"
#include "geqshift/synthetic.hpp"
#include "geqshift/training.hpp"
#include "geqshift/wigner.hpp"

namespace geqshift {

struct CheckResult {
  std::string name;
  double value = 0.0;  // worst observed error
  double tolerance = 0.0;
  double seconds = 0.0;
  std::string detail;

  CheckResult() = default;
  CheckResult(std::string n, double v, double tol) : name(std::move(n)), value(v), tolerance(tol) {}

  bool pass() const { return std::isfinite(value) && value <= tolerance; }
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

}  // namespace detail

/// Largest deviation of the table from the independent lowering-operator
/// construction, over every triple with l <= 3.
inline CheckResult check_cg_oracle(const CGTable &table, double tol = 1e-12) {
  detail::Stopwatch sw;
  CheckResult r{"cg_oracle", 0.0, tol};
  for (int a = 0; a <= 3; ++a)
    for (int b = 0; b <= 3; ++b)
      for (int c = 0; c <= 3; ++c) {
        const auto ref = reference::real_clebsch_gordan(a, b, c);
        const auto &blk = table.get(a, b, c);
        for (std::size_t i = 0; i < ref.size(); ++i) {
          const double e = std::abs(ref[i] - blk.data[i]);
          if (e > r.value) {
            r.value = e;
            r.detail = "worst block (" + std::to_string(a) + "," + std::to_string(b) + "," +
                       std::to_string(c) + ")";
          }
        }
      }
  r.seconds = sw.seconds();
  return r;
}

/// Coupling two vectors through (1,1,0) and (1,1,1) must give the dot and
/// cross products up to the block normalization and a global sign.
inline CheckResult check_cg_vector_products(const CGTable &table, std::uint64_t seed = 5,
                                            double tol = 1e-12) {
  detail::Stopwatch sw;
  CheckResult r{"cg_dot_cross", 0.0, tol};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  const auto &c0 = table.get(1, 1, 0);
  const auto &c1 = table.get(1, 1, 1);
  double sign0 = 0.0, sign1 = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Vec3 a{n01(rng), n01(rng), n01(rng)}, b{n01(rng), n01(rng), n01(rng)};
    // real degree-1 components are ordered (y, z, x)
    const double ar[3] = {a[1], a[2], a[0]}, br[3] = {b[1], b[2], b[0]};
    double s = 0.0;
    double v[3] = {0, 0, 0};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        s += c0(i, j, 0) * ar[i] * br[j];
        for (int k = 0; k < 3; ++k)
          v[k] += c1(i, j, k) * ar[i] * br[j];
      }
    const double dotp = dot(a, b) / std::sqrt(3.0);
    const Vec3 cr{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
    const double crr[3] = {cr[1] / std::sqrt(2.0), cr[2] / std::sqrt(2.0), cr[0] / std::sqrt(2.0)};
    if (t == 0) {
      sign0 = s * dotp >= 0 ? 1.0 : -1.0;
      sign1 = v[0] * crr[0] + v[1] * crr[1] + v[2] * crr[2] >= 0 ? 1.0 : -1.0;
    }
    r.value = std::max(r.value, std::abs(s - sign0 * dotp));
    for (int k = 0; k < 3; ++k)
      r.value = std::max(r.value, std::abs(v[k] - sign1 * crr[k]));
  }
  r.seconds = sw.seconds();
  return r;
}

/// Y(R r) = D(R) Y(r) for every degree up to 3 over `trials` random
/// (rotation, direction) pairs.
inline CheckResult check_sh_equivariance(const CGTable &table, int trials = 100,
                                         std::uint64_t seed = 11, double tol = 1e-12) {
  detail::Stopwatch sw;
  CheckResult r{"sh_equivariance", 0.0, tol};
  std::mt19937_64 rng(seed);
  constexpr int lmax = 3;
  for (int t = 0; t < trials; ++t) {
    const Mat3 rot = random_rotation(rng);
    const Vec3 d = random_unit_vector(rng);
    const auto y = real_spherical_harmonics<double>(lmax, d);
    const auto yr = real_spherical_harmonics<double>(lmax, rot * d);
    const auto ty = transform(y, rot, table);
    for (std::size_t i = 0; i < ty.size(); ++i)
      r.value = std::max(r.value, std::abs(ty[i] - yr[i]));
  }
  r.seconds = sw.seconds();
  return r;
}

struct EquivarianceOptions {
  int molecules = 20;
  int rotations = 10;
  int min_atoms = 5;
  int max_atoms = 30;
  std::uint64_t seed = 17;
  double tol = 1e-8;
  // output columns are standardized; multiply by the per-nucleus std to
  // compare in ppm
  std::array<double, 2> ppm_scale{1.0, 1.0};
};

/// Rotates, translates and inverts random molecules and compares the final
/// predictions (must be unchanged) and every layer's node states (must
/// transform block-wise by the Wigner D of the applied map).
inline std::vector<CheckResult> check_model_equivariance(const CGTable &table,
                                                         const ModelConfig &cfg,
                                                         const EquivarianceOptions &opt = {}) {
  detail::Stopwatch sw;
  CheckResult out_check{"model_invariance", 0.0, opt.tol};
  CheckResult state_check{"layer_equivariance", 0.0, opt.tol};
  Architecture arch(cfg, table);
  const auto params = init_params<double>(arch, cfg.seed);
  const auto &sig = arch.hidden();
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> shift(0.0, 5.0);
  SyntheticOptions so;
  so.min_atoms = opt.min_atoms;
  so.max_atoms = opt.max_atoms;
  so.conformers = 1;
  for (int m = 0; m < opt.molecules; ++m) {
    const auto rec = synthetic_molecule("eq-" + std::to_string(m), SaccharideClass(m % 3),
                                        opt.seed * 1000 + m, so);
    std::vector<Matrix<double>> base_states;
    const auto base = forward(build_graph(rec, 0, cfg.r_cut), params, arch, &base_states);
    for (int k = 0; k < opt.rotations; ++k) {
      const Mat3 rot = random_rotation(rng);
      const Vec3 t{shift(rng), shift(rng), shift(rng)};
      for (double s : {1.0, -1.0}) {
        Mat3 q = rot;
        for (auto &row : q)
          for (auto &v : row)
            v *= s;
        auto moved = rec;
        for (auto &x : moved.conformers[0])
          x = q * x + t;
        std::vector<Matrix<double>> states;
        const auto pred = forward(build_graph(moved, 0, cfg.r_cut), params, arch, &states);
        for (int n = 0; n < pred.rows; ++n)
          for (int c = 0; c < 2; ++c)
            out_check.value = std::max(out_check.value,
                                       opt.ppm_scale[c] * std::abs(pred(n, c) - base(n, c)));
        for (std::size_t l = 0; l < states.size(); ++l)
          for (int n = 0; n < states[l].rows; ++n) {
            GeometricTensor<double> x(
                sig, std::vector<double>(base_states[l].row(n), base_states[l].row(n) + sig.dim()));
            const auto tx = transform(x, q, table);
            for (int i = 0; i < sig.dim(); ++i)
              state_check.value = std::max(state_check.value, std::abs(tx[i] - states[l](n, i)));
          }
      }
    }
  }
  out_check.seconds = state_check.seconds = sw.seconds();
  const std::string d = std::to_string(opt.molecules) + " molecules x " +
                        std::to_string(opt.rotations) + " rotations x {E, inversion}";
  out_check.detail = state_check.detail = d;
  return {out_check, state_check};
}

/// Small configuration used for finite-difference checks.
inline ModelConfig gradcheck_config(int l_max = 2) {
  ModelConfig c;
  c.n_layers = 2;
  c.hidden_sig = "8x0e+4x1o+2x2e";
  c.l_max = l_max;
  c.node_emb_dim = 8;
  c.edge_emb_dim = 6;
  c.readout_scalar_dim = 8;
  c.readout_hidden = 12;
  c.weight_nn_hidden = 8;
  c.seed = 3;
  return c;
}

struct GradcheckOptions {
  int atoms = 6;
  double h = 1e-5;
  double tol = 1e-4;
  // denominators below this are replaced by it, so gradients that are zero
  // up to rounding do not produce huge relative errors
  double floor = 1e-7;
  std::uint64_t seed = 23;
};

/// Central finite differences against reverse mode for every scalar of
/// every parameter, using the training loss on a single molecule. Targets
/// sit at least 0.5 away from the initial predictions so the absolute value
/// in the loss is never evaluated near its kink.
inline CheckResult check_gradients(const CGTable &table, const ModelConfig &cfg,
                                   const GradcheckOptions &opt = {}) {
  detail::Stopwatch sw;
  CheckResult r{"gradcheck_lmax" + std::to_string(cfg.l_max), 0.0, opt.tol};
  Architecture arch(cfg, table);
  auto params = init_params<double>(arch, cfg.seed);
  SyntheticOptions so;
  so.min_atoms = so.max_atoms = opt.atoms;
  so.conformers = 1;
  const auto rec = synthetic_molecule("gradcheck", SaccharideClass::mono, opt.seed, so);

  TrainItem<double> item;
  item.graph = build_graph(rec, 0, cfg.r_cut);
  const auto init = forward(item.graph, params, arch);
  Matrix<double> target(init.rows, 2), mask(init.rows, 2);
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> off(0.5, 1.5);
  for (const auto &l : rec.labels) {
    const int c = static_cast<int>(l.nucleus);
    const double sign = (rng() & 1) ? 1.0 : -1.0;
    target(l.atom_index, c) = init(l.atom_index, c) + sign * off(rng);
    mask(l.atom_index, c) = 1.0;
  }
  item.target = std::make_shared<const Matrix<double>>(target);
  item.mask = std::make_shared<const Matrix<double>>(mask);
  const auto batch = make_batch<double>({&item});
  const auto g = gradients(arch, params, batch);

  auto loss = [&]() { return mae_loss(forward(item.graph, params, arch), target, mask); };
  long checked = 0;
  for (auto &[name, w] : params) {
    const auto &gw = g.grads.at(name);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double w0 = w.data[i];
      w.data[i] = w0 + opt.h;
      const double lp = loss();
      w.data[i] = w0 - opt.h;
      const double lm = loss();
      w.data[i] = w0;
      const double fd = (lp - lm) / (2 * opt.h);
      const double ad = gw.data[i];
      const double rel = std::abs(fd - ad) / std::max({std::abs(fd), std::abs(ad), opt.floor});
      if (!(rel <= r.value)) {
        r.value = rel;
        r.detail = name + "[" + std::to_string(i) + "]";
      }
      ++checked;
    }
  }
  r.detail = std::to_string(checked) + " scalars, worst " + r.detail;
  r.seconds = sw.seconds();
  return r;
}

/// Everything `geqshift selfcheck` runs.
inline std::vector<CheckResult> run_selfcheck(const CGTable &table = CGTable::global()) {
  std::vector<CheckResult> out;
  out.push_back(check_cg_oracle(table));
  out.push_back(check_cg_vector_products(table));
  out.push_back(check_sh_equivariance(table));
  ModelConfig eq = gradcheck_config(2);
  eq.hidden_sig = "16x0e+8x1o+4x2e";
  eq.node_emb_dim = 16;
  EquivarianceOptions eo;
  eo.molecules = 4;
  eo.rotations = 3;
  for (auto &r : check_model_equivariance(table, eq, eo))
    out.push_back(r);
  out.push_back(check_gradients(table, gradcheck_config(0)));
  out.push_back(check_gradients(table, gradcheck_config(2)));
  return out;
}

}  // namespace geqshift
