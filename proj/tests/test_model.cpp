//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace geqshift;

TEST(ModelConfig, DefaultsAndJson) {
  ModelConfig c;
  EXPECT_EQ(c.n_layers, 7);
  EXPECT_EQ(c.hidden().str(), "64x0e+32x1o+8x2e");
  EXPECT_EQ(c.node_emb_dim, 128);
  EXPECT_EQ(c.edge_emb_dim, 32);
  EXPECT_EQ(c.readout_scalar_dim, 128);
  EXPECT_EQ(c.readout_hidden, 384);
  EXPECT_EQ(c.r_cut, 6.0);
  EXPECT_EQ(c.l_max, 2);
  auto j = to_json(c);
  EXPECT_EQ(to_json(model_config_from_json(j)), j);
}

TEST(ModelConfig, Errors) {
  ModelConfig c;
  EXPECT_THROW(update_from_json(c, {{"n_layer", 3}}), ConfigError);
  EXPECT_THROW(update_from_json(c, {{"aggregate", "sum"}}), ConfigError);
  ModelConfig bad;
  bad.n_layers = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  ModelConfig odd;
  odd.node_emb_dim = 7;
  EXPECT_THROW(odd.validate(), ConfigError);
}

TEST(ModelConfig, LmaxFiltersHidden) {
  auto c = gqtest::tiny_config(0);
  EXPECT_EQ(c.hidden().str(), "8x0e");
  c.l_max = 1;
  EXPECT_EQ(c.hidden().str(), "8x0e+4x1o");
}

TEST(Architecture, ParameterSet) {
  auto cfg = gqtest::tiny_config(2);
  Architecture arch(cfg);
  const auto &s = arch.shapes();
  for (const char *k : {"embed.element", "embed.hydrogen", "embed.bond", "readout.linear.weight",
                        "readout.mlp.0.weight", "readout.mlp.1.weight", "readout.mlp.1.bias"})
    EXPECT_TRUE(s.count(k)) << k;
  for (int l = 0; l < cfg.n_layers; ++l)
    for (const char *k : {"query.weight", "key_net.0.weight", "value_net.1.weight",
                          "key_linear.weight", "value_linear.weight", "ffn_in.weight",
                          "ffn_out.weight", "norm.gain"})
      EXPECT_TRUE(s.count("layer" + std::to_string(l) + "." + k)) << l << " " << k;
  // input of layer 0 is the scalar embedding, so only it needs a skip map
  EXPECT_TRUE(s.count("layer0.skip.weight"));
  EXPECT_FALSE(s.count("layer1.skip.weight"));
  EXPECT_EQ(s.at("embed.element").rows, 5);
  EXPECT_EQ(s.at("embed.element").cols, cfg.node_emb_dim / 2);
  EXPECT_EQ(s.at("embed.hydrogen").rows, 5);
  EXPECT_EQ(s.at("embed.bond").rows, num_bond_codes);
  EXPECT_EQ(s.at("embed.bond").cols, cfg.edge_emb_dim - 1);
  EXPECT_EQ(s.at("readout.mlp.1.weight").rows, cfg.readout_hidden);
  EXPECT_EQ(s.at("readout.mlp.1.weight").cols, 2);
}

TEST(Architecture, InitAndCheckParams) {
  Architecture arch(gqtest::tiny_config(2));
  auto a = init_params<double>(arch, 5);
  EXPECT_NO_THROW(check_params(arch, a));
  EXPECT_EQ(a, init_params<double>(arch, 5));
  EXPECT_NE(a, init_params<double>(arch, 6));
  EXPECT_EQ(a.at("layer0.norm.gain").data, std::vector<double>(a.at("layer0.norm.gain").size(), 1.0));

  auto missing = a;
  missing.erase("layer1.query.weight");
  EXPECT_THROW(check_params(arch, missing), MismatchError);
  auto extra = a;
  extra["bogus"] = Matrix<double>(1, 1);
  EXPECT_THROW(check_params(arch, extra), MismatchError);
  auto shape = a;
  shape["embed.bond"] = Matrix<double>(2, 2);
  EXPECT_THROW(check_params(arch, shape), MismatchError);
}

TEST(Embedding, NodeAndEdge) {
  auto cfg = gqtest::tiny_config(2);
  Architecture arch(cfg);
  auto p = init_params<double>(arch, 2);
  Atom o{0, 8, 1};
  auto x = node_embedding(o, p, arch);
  EXPECT_EQ(x.signature().str(), "8x0e");
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(x[i], p.at("embed.element")(2, i));
    EXPECT_EQ(x[4 + i], p.at("embed.hydrogen")(1, i));
  }
  EXPECT_THROW(node_embedding(Atom{0, 35, 0}, p, arch), ConfigError);
  EXPECT_THROW(node_embedding(Atom{0, 6, 5}, p, arch), ConfigError);

  Edge e{0, 1, 1.43, {0.0, 0.6, 0.8}, BondOrder::single};
  auto s = edge_scalars(e, p, arch);
  ASSERT_EQ(static_cast<int>(s.size()), cfg.edge_emb_dim);
  for (int i = 0; i < 5; ++i)
    EXPECT_EQ(s[i], p.at("embed.bond")(1, i));
  EXPECT_EQ(s[5], 1.43);

  auto sh = edge_sh<double>(e, 2);
  ASSERT_EQ(sh.size(), 9u);
  std::size_t k = 0;
  for (int l = 0; l <= 2; ++l)
    for (double v : reference::solid_harmonics(l, e.unit_vec))
      EXPECT_NEAR(sh[k++], v, 1e-12);
}

TEST(Forward, ShapeAndFinite) {
  auto cfg = gqtest::tiny_config(2);
  Architecture arch(cfg);
  auto p = init_params<double>(arch, 1);
  auto r = synthetic_molecule("f", SaccharideClass::di, 4);
  std::vector<Matrix<double>> states;
  auto out = forward(build_graph(r, 0), p, arch, &states);
  EXPECT_EQ(out.rows, r.num_atoms());
  EXPECT_EQ(out.cols, 2);
  for (double v : out.data)
    EXPECT_TRUE(std::isfinite(v));
  ASSERT_EQ(static_cast<int>(states.size()), cfg.n_layers);
  for (const auto &s : states)
    EXPECT_EQ(s.cols, cfg.hidden().dim());
}

TEST(Forward, InvariantAndEquivariant) {
  EquivarianceOptions opt;
  opt.molecules = 3;
  opt.rotations = 3;
  opt.max_atoms = 14;
  for (int l = 0; l <= 2; ++l)
    for (const auto &r : check_model_equivariance(CGTable::global(), gqtest::tiny_config(l), opt))
      EXPECT_TRUE(r.pass()) << "l_max " << l << " " << r.name << " " << r.value;
}

TEST(Forward, ScalarOnlyWithoutHigherDegrees) {
  auto cfg = gqtest::tiny_config(0);
  Architecture arch(cfg);
  for (const auto &sig : arch.layer_signatures())
    for (const auto &e : sig.entries())
      EXPECT_EQ(e.ir.l, 0);
  EXPECT_EQ(arch.sh().str(), "1x0e");
  auto p = init_params<double>(arch, 1);
  std::vector<Matrix<double>> states;
  forward(build_graph(synthetic_molecule("s", SaccharideClass::mono, 2), 0), p, arch, &states);
  for (const auto &s : states)
    EXPECT_EQ(s.cols, 8);
}

TEST(Forward, AtomPermutationRelabelsOutput) {
  auto cfg = gqtest::tiny_config(2);
  Architecture arch(cfg);
  auto p = init_params<double>(arch, 9);
  auto r = synthetic_molecule("p", SaccharideClass::mono, 12);
  const int n = r.num_atoms();
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  auto q = r;
  for (int i = 0; i < n; ++i) {
    q.atoms[perm[i]] = r.atoms[i];
    q.atoms[perm[i]].index = perm[i];
    q.conformers[0][perm[i]] = r.conformers[0][i];
  }
  for (auto &b : q.bonds) {
    b.i = perm[b.i];
    b.j = perm[b.j];
  }
  auto a = forward(build_graph(r, 0), p, arch);
  auto b = forward(build_graph(q, 0), p, arch);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c)
      EXPECT_NEAR(a(i, c), b(perm[i], c), 1e-10);
}

TEST(Forward, BatchedEqualsSeparate) {
  Architecture arch(gqtest::tiny_config(2));
  auto p = init_params<double>(arch, 4);
  auto g1 = build_graph(synthetic_molecule("a", SaccharideClass::mono, 1), 0);
  auto g2 = build_graph(synthetic_molecule("b", SaccharideClass::tri, 2), 0);
  Tape<double> tape;
  auto pv = load_params(tape, p, false);
  auto in = prepare_inputs<double>(arch, batch_graphs({&g1, &g2}));
  auto both = tape.value(forward(tape, arch, pv, in));
  auto s1 = forward(g1, p, arch), s2 = forward(g2, p, arch);
  for (int i = 0; i < g1.num_nodes(); ++i)
    for (int c = 0; c < 2; ++c) {
      EXPECT_NEAR(both(i, c), s1(i, c), 1e-12);
    }
  for (int i = 0; i < g2.num_nodes(); ++i)
    for (int c = 0; c < 2; ++c)
      EXPECT_NEAR(both(g1.num_nodes() + i, c), s2(i, c), 1e-12);
}

TEST(Forward, FloatTracksDouble) {
  Architecture arch(gqtest::tiny_config(2));
  auto pd = init_params<double>(arch, 4);
  auto pf = init_params<float>(arch, 4);
  auto g = build_graph(synthetic_molecule("a", SaccharideClass::di, 3), 0);
  auto d = forward(g, pd, arch);
  auto f = forward(g, pf, arch);
  for (std::size_t i = 0; i < d.size(); ++i)
    EXPECT_NEAR(d.data[i], f.data[i], 1e-3);
}
