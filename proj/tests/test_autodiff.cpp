//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <functional>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace geqshift;

namespace {

using Build = std::function<Var(Tape<double> &, const std::vector<Var> &)>;

Matrix<double> random_matrix(int r, int c, std::mt19937_64 &rng) {
  return Matrix<double>(r, c, gqtest::random_vector(static_cast<std::size_t>(r) * c, rng));
}

/// Reduces an op's output to a scalar with a fixed random projection (a
/// dense layer into one column) followed by a mean; compares every input
/// gradient to central differences.
void expect_gradients(std::vector<Matrix<double>> inputs, const Build &build, std::uint64_t seed,
                      double tol = 1e-7) {
  std::mt19937_64 rng(seed);
  std::optional<Matrix<double>> proj;
  std::shared_ptr<const Matrix<double>> target;
  auto loss = [&](const std::vector<Matrix<double>> &in, std::vector<Matrix<double>> *grads) {
    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto &m : in)
      vars.push_back(tape.variable(m));
    Var out = build(tape, vars);
    const int rows = tape.value(out).rows;
    if (!proj)
      proj = random_matrix(tape.value(out).cols, 1, rng);
    Var s = ops::dense(tape, out, tape.constant(*proj), tape.constant(Matrix<double>(1, 1)));
    // targets one below the unperturbed s: the loss is the plain mean of s
    // minus a constant, and stays O(1) so differences do not cancel
    if (!target) {
      Matrix<double> t0 = tape.value(s);
      for (auto &x : t0.data)
        x -= 1.0;
      target = std::make_shared<const Matrix<double>>(std::move(t0));
    }
    auto mask = std::make_shared<const Matrix<double>>(rows, 1, std::vector<double>(rows, 1.0));
    Var l = ops::masked_mae(tape, s, target, mask);
    tape.backward(l);
    if (grads)
      for (std::size_t i = 0; i < vars.size(); ++i)
        grads->push_back(tape.has_grad(vars[i]) ? tape.grad(vars[i])
                                                : Matrix<double>(in[i].rows, in[i].cols));
    return tape.value(l).data[0];
  };
  std::vector<Matrix<double>> ad;
  loss(inputs, &ad);
  const double h = 1e-6;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k].data[i];
      inputs[k].data[i] = x0 + h;
      const double lp = loss(inputs, nullptr);
      inputs[k].data[i] = x0 - h;
      const double lm = loss(inputs, nullptr);
      inputs[k].data[i] = x0;
      EXPECT_NEAR(ad[k].data[i], (lp - lm) / (2 * h), tol) << "input " << k << " entry " << i;
    }
}

IrrepsSignature sig(const char *s) { return IrrepsSignature::parse(s); }

}  // namespace

TEST(Autodiff, DenseAndSilu) {
  std::mt19937_64 rng(1);
  expect_gradients({random_matrix(4, 3, rng), random_matrix(3, 5, rng), random_matrix(1, 5, rng)},
                   [](Tape<double> &t, const std::vector<Var> &v) {
                     return ops::silu(t, ops::dense(t, v[0], v[1], v[2]));
                   },
                   2);
}

TEST(Autodiff, AddConcatGatherScatter) {
  std::mt19937_64 rng(3);
  auto idx = std::make_shared<const std::vector<int>>(std::vector<int>{2, 0, 2, 1});
  auto cols = std::make_shared<const std::vector<int>>(std::vector<int>{4, 1, 3});
  expect_gradients({random_matrix(3, 2, rng), random_matrix(3, 2, rng), random_matrix(3, 1, rng)},
                   [&](Tape<double> &t, const std::vector<Var> &v) {
                     Var a = ops::add(t, v[0], v[1]);
                     Var c = ops::concat_cols(t, a, v[2]);
                     Var g = ops::gather_rows(t, c, idx);
                     return ops::scatter_columns(t, g, cols, 6);
                   },
                   4);
}

TEST(Autodiff, AttentionPrimitives) {
  std::mt19937_64 rng(5);
  auto seg = std::make_shared<const std::vector<int>>(std::vector<int>{0, 0, 1, 2, 2, 2});
  expect_gradients({random_matrix(6, 4, rng), random_matrix(6, 4, rng), random_matrix(6, 3, rng)},
                   [&](Tape<double> &t, const std::vector<Var> &v) {
                     Var logits = ops::row_dot(t, v[0], v[1], 0.5);
                     Var alpha = ops::segment_softmax(t, logits, seg, 3);
                     return ops::weighted_scatter_sum(t, alpha, v[2], seg, 3);
                   },
                   6);
}

TEST(Autodiff, SegmentSoftmaxSumsToOne) {
  Tape<double> tape;
  auto seg = std::make_shared<const std::vector<int>>(std::vector<int>{1, 0, 1, 1});
  Var l = tape.constant(Matrix<double>(4, 1, {1000.0, -3.0, 999.0, 0.0}));
  const auto &a = tape.value(ops::segment_softmax(tape, l, seg, 2));
  EXPECT_DOUBLE_EQ(a(1, 0), 1.0);
  EXPECT_NEAR(a(0, 0) + a(2, 0) + a(3, 0), 1.0, 1e-15);
  EXPECT_TRUE(std::isfinite(a(0, 0)));
}

TEST(Autodiff, EquivariantPrimitives) {
  std::mt19937_64 rng(7);
  auto s = sig("3x0e+2x1o+1x2e");
  auto tp = std::make_shared<const TensorProductPlan>(
      TensorProductPlan::channelwise(s, sh_signature(2), s));
  auto lin = std::make_shared<const LinearPlan>(tp->out(), s);
  auto gin = GatePlan::input_for(s);
  auto ffn = std::make_shared<const LinearPlan>(s, gin, true);
  auto gate = std::make_shared<const GatePlan>(gin);
  auto ln = std::make_shared<const LayerNormPlan>(s, 1e-5);
  const int rows = 3;
  expect_gradients({random_matrix(rows, s.dim(), rng), random_matrix(rows, 9, rng),
                    random_matrix(rows, tp->weight_count(), rng),
                    random_matrix(1, lin->weight_count(), rng),
                    random_matrix(1, ffn->weight_count(), rng),
                    random_matrix(1, ffn->bias_count(), rng),
                    random_matrix(1, ln->gain_count(), rng)},
                   [&](Tape<double> &t, const std::vector<Var> &v) {
                     Var x = ops::tensor_product(t, tp, v[0], v[1], v[2]);
                     x = ops::linear(t, lin, x, v[3], Var{});
                     x = ops::linear(t, ffn, x, v[4], v[5]);
                     x = ops::gate(t, gate, x);
                     return ops::layer_norm(t, ln, x, v[6]);
                   },
                   8, 1e-6);
}

TEST(Autodiff, LinearAdjointIsTranspose) {
  std::mt19937_64 rng(9);
  auto plan = std::make_shared<const LinearPlan>(sig("3x0e+2x1o"), sig("2x0e+2x1o"));
  auto w = random_matrix(1, plan->weight_count(), rng);
  auto x = random_matrix(2, plan->in().dim(), rng), q = random_matrix(2, plan->out().dim(), rng);
  Tape<double> tape;
  const Matrix<double> lx = tape.value(ops::linear(tape, plan, tape.constant(x), tape.constant(w), Var{}));
  const Matrix<double> aq = tape.value(ops::linear_adjoint(tape, plan, tape.constant(q), tape.constant(w)));
  // <q, W x> == <W^T q, x>
  for (int n = 0; n < 2; ++n) {
    double a = 0.0, b = 0.0;
    for (int j = 0; j < lx.cols; ++j)
      a += q(n, j) * lx(n, j);
    for (int j = 0; j < aq.cols; ++j)
      b += aq(n, j) * x(n, j);
    EXPECT_NEAR(a, b, 1e-12);
  }
  expect_gradients({q, w},
                   [&](Tape<double> &t, const std::vector<Var> &v) {
                     return ops::linear_adjoint(t, plan, v[0], v[1]);
                   },
                   10);
}

TEST(Autodiff, MaskedMae) {
  Tape<double> tape;
  Var p = tape.variable(Matrix<double>(2, 2, {1.0, 5.0, -2.0, 0.0}));
  auto target = std::make_shared<const Matrix<double>>(2, 2, std::vector<double>{0.0, 100.0, 1.0, 0.0});
  auto mask = std::make_shared<const Matrix<double>>(2, 2, std::vector<double>{1.0, 0.0, 1.0, 1.0});
  Var l = ops::masked_mae(tape, p, target, mask);
  EXPECT_DOUBLE_EQ(tape.value(l).data[0], (1.0 + 3.0 + 0.0) / 3.0);
  tape.backward(l);
  const auto &g = tape.grad(p);
  EXPECT_DOUBLE_EQ(g.data[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(g.data[1], 0.0);
  EXPECT_DOUBLE_EQ(g.data[2], -1.0 / 3.0);
}
