//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geqshift/autodiff.hpp"
#include "geqshift/equivariant.hpp"
#include "geqshift/graph.hpp"
#include "geqshift/logging.hpp"
#include "geqshift/spherical_harmonics.hpp"

namespace geqshift {

// Messages are summed from values (default) or, literally, from keys.
enum class AggregateMode { values, keys };
// Node whose features enter the key/value tensor products of edge j -> i.
enum class QkvSource { src, dst };
// Which readout channels contribute to the loss.
enum class NucleusMode { both, C, H };

struct ModelConfig {
  int n_layers = 7;
  std::string hidden_sig = "64x0e+32x1o+8x2e";
  int node_emb_dim = 128;
  int edge_emb_dim = 32;
  int readout_scalar_dim = 128;
  int readout_hidden = 384;
  double r_cut = default_cutoff;
  int l_max = 2;
  int weight_nn_hidden = 64;
  int n_rbf = 0;  // 0: raw distance as the last edge scalar
  double ln_eps = 1e-5;
  std::vector<int> elements{6, 7, 8, 15, 16};
  int max_hydrogens = 4;
  AggregateMode aggregate = AggregateMode::values;
  QkvSource qkv_source = QkvSource::src;
  NucleusMode nucleus = NucleusMode::both;
  std::uint64_t seed = 0;

  IrrepsSignature hidden() const {
    return IrrepsSignature::parse(hidden_sig).filter_lmax(l_max);
  }

  void validate() const {
    auto positive = [](int v, const char *name) {
      if (v <= 0)
        throw ConfigError(std::string("model config: ") + name + " must be positive");
    };
    positive(n_layers, "n_layers");
    positive(node_emb_dim, "node_emb_dim");
    positive(edge_emb_dim, "edge_emb_dim");
    positive(readout_scalar_dim, "readout_scalar_dim");
    positive(readout_hidden, "readout_hidden");
    positive(weight_nn_hidden, "weight_nn_hidden");
    if (node_emb_dim % 2 != 0)
      throw ConfigError("model config: node_emb_dim must be even (element || hydrogen)");
    if (l_max < 0 || l_max > 2)
      throw ConfigError("model config: l_max must be 0, 1 or 2");
    if (!(r_cut > 0))
      throw ConfigError("model config: r_cut must be positive");
    if (!(ln_eps > 0))
      throw ConfigError("model config: ln_eps must be positive");
    const int bond_dim = edge_emb_dim - (n_rbf > 0 ? n_rbf : 1);
    if (n_rbf < 0 || bond_dim <= 0)
      throw ConfigError("model config: edge_emb_dim too small for the distance features");
    if (elements.empty())
      throw ConfigError("model config: empty element vocabulary");
    if (max_hydrogens < 0)
      throw ConfigError("model config: max_hydrogens must be >= 0");
    auto sig = hidden();
    if (sig.empty() || !sig.has_type({0, Parity::even}))
      throw ConfigError("model config: hidden signature needs a 0e entry");
  }
};

inline std::string to_string(AggregateMode m) { return m == AggregateMode::values ? "values" : "keys"; }
inline std::string to_string(QkvSource s) { return s == QkvSource::src ? "src" : "dst"; }
inline std::string to_string(NucleusMode m) {
  return m == NucleusMode::both ? "both" : (m == NucleusMode::C ? "C" : "H");
}

inline nlohmann::json to_json(const ModelConfig &c) {
  return {{"n_layers", c.n_layers},
          {"hidden_sig", c.hidden_sig},
          {"node_emb_dim", c.node_emb_dim},
          {"edge_emb_dim", c.edge_emb_dim},
          {"readout_scalar_dim", c.readout_scalar_dim},
          {"readout_hidden", c.readout_hidden},
          {"r_cut", c.r_cut},
          {"l_max", c.l_max},
          {"weight_nn_hidden", c.weight_nn_hidden},
          {"n_rbf", c.n_rbf},
          {"ln_eps", c.ln_eps},
          {"elements", c.elements},
          {"max_hydrogens", c.max_hydrogens},
          {"aggregate", to_string(c.aggregate)},
          {"qkv_source", to_string(c.qkv_source)},
          {"nucleus", to_string(c.nucleus)},
          {"seed", c.seed}};
}

/// Reads known keys from `j` into `c`; absent keys keep their value.
inline void update_from_json(ModelConfig &c, const nlohmann::json &j) {
  static const std::set<std::string> known{
      "n_layers", "hidden_sig", "node_emb_dim", "edge_emb_dim", "readout_scalar_dim",
      "readout_hidden", "r_cut", "l_max", "weight_nn_hidden", "n_rbf", "ln_eps",
      "elements", "max_hydrogens", "aggregate", "qkv_source", "nucleus", "seed"};
  try {
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!known.count(it.key()))
        throw ConfigError("unknown model config key \"" + it.key() + "\"");
    auto get = [&](const char *k, auto &v) {
      if (j.contains(k))
        v = j.at(k).get<std::decay_t<decltype(v)>>();
    };
    get("n_layers", c.n_layers);
    get("hidden_sig", c.hidden_sig);
    get("node_emb_dim", c.node_emb_dim);
    get("edge_emb_dim", c.edge_emb_dim);
    get("readout_scalar_dim", c.readout_scalar_dim);
    get("readout_hidden", c.readout_hidden);
    get("r_cut", c.r_cut);
    get("l_max", c.l_max);
    get("weight_nn_hidden", c.weight_nn_hidden);
    get("n_rbf", c.n_rbf);
    get("ln_eps", c.ln_eps);
    get("elements", c.elements);
    get("max_hydrogens", c.max_hydrogens);
    get("seed", c.seed);
    if (j.contains("aggregate")) {
      auto s = j.at("aggregate").get<std::string>();
      if (s != "values" && s != "keys")
        throw ConfigError("aggregate must be \"values\" or \"keys\"");
      c.aggregate = s == "values" ? AggregateMode::values : AggregateMode::keys;
    }
    if (j.contains("qkv_source")) {
      auto s = j.at("qkv_source").get<std::string>();
      if (s != "src" && s != "dst")
        throw ConfigError("qkv_source must be \"src\" or \"dst\"");
      c.qkv_source = s == "src" ? QkvSource::src : QkvSource::dst;
    }
    if (j.contains("nucleus")) {
      auto s = j.at("nucleus").get<std::string>();
      if (s == "both")
        c.nucleus = NucleusMode::both;
      else if (s == "C")
        c.nucleus = NucleusMode::C;
      else if (s == "H")
        c.nucleus = NucleusMode::H;
      else
        throw ConfigError("nucleus must be \"both\", \"C\" or \"H\"");
    }
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  IrrepsSignature::parse(c.hidden_sig);
}

inline ModelConfig model_config_from_json(const nlohmann::json &j) {
  ModelConfig c;
  update_from_json(c, j);
  c.validate();
  return c;
}

/// Learnable arrays keyed by stable names (see README for the key list).
template <class T> using ParamMap = std::map<std::string, Matrix<T>>;

struct ParamShape {
  int rows = 0;
  int cols = 0;
  enum class Init { normal, fan_in, zeros, ones } init = Init::fan_in;
  int fan_in = 1;
};

/// Wiring of one attention layer.
struct LayerPlans {
  IrrepsSignature in;
  std::shared_ptr<const LinearPlan> query;
  std::shared_ptr<const TensorProductPlan> tp;
  std::shared_ptr<const LinearPlan> key_linear;
  std::shared_ptr<const LinearPlan> value_linear;
  std::shared_ptr<const LinearPlan> ffn_in;
  std::shared_ptr<const GatePlan> gate;
  std::shared_ptr<const LinearPlan> ffn_out;
  std::shared_ptr<const LinearPlan> skip;  // null when in == hidden
  std::shared_ptr<const std::vector<int>> pad_columns;  // hidden columns reached when in != hidden
  std::shared_ptr<const LayerNormPlan> norm;
};

/// All signatures and plans implied by a ModelConfig, plus the parameter
/// key set and shapes.
class Architecture {
 public:
  explicit Architecture(ModelConfig config, const CGTable &table = CGTable::global())
      : config_(std::move(config)) {
    config_.validate();
    hidden_ = config_.hidden();
    sh_ = sh_signature(config_.l_max);
    const int half = config_.node_emb_dim / 2;
    const int dist_dim = config_.n_rbf > 0 ? config_.n_rbf : 1;
    const int bond_dim = config_.edge_emb_dim - dist_dim;

    add("embed.element", static_cast<int>(config_.elements.size()), half, ParamShape::Init::normal);
    add("embed.hydrogen", config_.max_hydrogens + 1, half, ParamShape::Init::normal);
    add("embed.bond", num_bond_codes, bond_dim, ParamShape::Init::normal);

    IrrepsSignature in({{config_.node_emb_dim, {0, Parity::even}}});
    for (int k = 0; k < config_.n_layers; ++k) {
      const std::string p = "layer" + std::to_string(k) + ".";
      LayerPlans lp;
      lp.in = in;
      lp.tp = std::make_shared<TensorProductPlan>(
          TensorProductPlan::channelwise(in, sh_, hidden_, table));
      lp.key_linear = std::make_shared<LinearPlan>(lp.tp->out(), hidden_);
      lp.value_linear = std::make_shared<LinearPlan>(lp.tp->out(), hidden_);
      auto gate_in = GatePlan::input_for(hidden_);
      lp.ffn_in = std::make_shared<LinearPlan>(hidden_, gate_in, true);
      lp.gate = std::make_shared<GatePlan>(gate_in);
      lp.ffn_out = std::make_shared<LinearPlan>(lp.gate->out(), hidden_, true);
      if (in == hidden_) {
        lp.query = std::make_shared<LinearPlan>(in, hidden_);
      } else {
        // only the types present in the input can be reached linearly; the
        // rest of the hidden signature is zero-padded
        auto present = hidden_.filter_types(in);
        lp.query = std::make_shared<LinearPlan>(in, present);
        lp.skip = std::make_shared<LinearPlan>(in, present);
        std::vector<int> cols;
        for (std::size_t e = 0; e < hidden_.size(); ++e)
          if (in.has_type(hidden_[e].ir))
            for (int c = 0; c < hidden_[e].dim(); ++c)
              cols.push_back(hidden_.offset(e) + c);
        lp.pad_columns = std::make_shared<std::vector<int>>(std::move(cols));
      }
      lp.norm = std::make_shared<LayerNormPlan>(hidden_, config_.ln_eps);

      add_linear(p + "query", *lp.query, false);
      for (const char *net : {"key_net", "value_net"}) {
        add(p + net + ".0.weight", config_.edge_emb_dim, config_.weight_nn_hidden,
            ParamShape::Init::fan_in, config_.edge_emb_dim);
        add(p + net + ".0.bias", 1, config_.weight_nn_hidden, ParamShape::Init::zeros);
        add(p + net + ".1.weight", config_.weight_nn_hidden, lp.tp->weight_count(),
            ParamShape::Init::fan_in, config_.weight_nn_hidden);
        add(p + net + ".1.bias", 1, lp.tp->weight_count(), ParamShape::Init::zeros);
      }
      add_linear(p + "key_linear", *lp.key_linear, false);
      add_linear(p + "value_linear", *lp.value_linear, false);
      add_linear(p + "ffn_in", *lp.ffn_in, true);
      add_linear(p + "ffn_out", *lp.ffn_out, true);
      if (lp.skip)
        add_linear(p + "skip", *lp.skip, false);
      add(p + "norm.gain", 1, lp.norm->gain_count(), ParamShape::Init::ones);
      layers_.push_back(std::move(lp));
      in = hidden_;
    }
    readout_ = std::make_shared<LinearPlan>(
        hidden_, IrrepsSignature({{config_.readout_scalar_dim, {0, Parity::even}}}), true);
    add_linear("readout.linear", *readout_, true);
    add("readout.mlp.0.weight", config_.readout_scalar_dim, config_.readout_hidden,
        ParamShape::Init::fan_in, config_.readout_scalar_dim);
    add("readout.mlp.0.bias", 1, config_.readout_hidden, ParamShape::Init::zeros);
    add("readout.mlp.1.weight", config_.readout_hidden, 2, ParamShape::Init::fan_in,
        config_.readout_hidden);
    add("readout.mlp.1.bias", 1, 2, ParamShape::Init::zeros);
  }

  const ModelConfig &config() const { return config_; }
  const IrrepsSignature &hidden() const { return hidden_; }
  const IrrepsSignature &sh() const { return sh_; }
  const std::vector<LayerPlans> &layers() const { return layers_; }
  const LinearPlan &readout() const { return *readout_; }
  std::shared_ptr<const LinearPlan> readout_ptr() const { return readout_; }
  const std::map<std::string, ParamShape> &shapes() const { return shapes_; }

  /// Signature of the node states after each layer.
  std::vector<IrrepsSignature> layer_signatures() const {
    return std::vector<IrrepsSignature>(layers_.size(), hidden_);
  }

  int element_index(int z) const {
    for (std::size_t i = 0; i < config_.elements.size(); ++i)
      if (config_.elements[i] == z)
        return static_cast<int>(i);
    throw ConfigError("element Z=" + std::to_string(z) + " is not in the model vocabulary");
  }
  int hydrogen_index(int h) const {
    if (h < 0 || h > config_.max_hydrogens)
      throw ConfigError("hydrogen count " + std::to_string(h) +
                        " is outside the model vocabulary [0," +
                        std::to_string(config_.max_hydrogens) + "]");
    return h;
  }

 private:
  void add(const std::string &name, int rows, int cols, ParamShape::Init init, int fan_in = 1) {
    shapes_[name] = ParamShape{rows, cols, init, fan_in};
  }
  void add_linear(const std::string &name, const LinearPlan &plan, bool bias) {
    // one flat weight array, initialized block by block with 1/fan_in variance
    add(name + ".weight", 1, plan.weight_count(), ParamShape::Init::fan_in, 0);
    linear_plans_[name + ".weight"] = &plan;
    if (bias && plan.bias_count() > 0)
      add(name + ".bias", 1, plan.bias_count(), ParamShape::Init::zeros);
  }

  ModelConfig config_;
  IrrepsSignature hidden_, sh_;
  std::vector<LayerPlans> layers_;
  std::shared_ptr<const LinearPlan> readout_;
  std::map<std::string, ParamShape> shapes_;
  std::map<std::string, const LinearPlan *> linear_plans_;

  template <class T>
  friend ParamMap<T> init_params(const Architecture &arch, std::uint64_t seed);
};

/// Deterministic initialization: embeddings ~ N(0,1); dense and linear
/// weights ~ N(0, 1/fan_in); biases 0; layer-norm gains 1. Parameters are
/// drawn in key order from one generator.
template <class T> ParamMap<T> init_params(const Architecture &arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamMap<T> params;
  for (const auto &[name, shape] : arch.shapes_) {
    Matrix<T> m(shape.rows, shape.cols);
    switch (shape.init) {
    case ParamShape::Init::normal:
      for (auto &v : m.data)
        v = static_cast<T>(normal(rng));
      break;
    case ParamShape::Init::zeros:
      break;
    case ParamShape::Init::ones:
      std::fill(m.data.begin(), m.data.end(), T(1));
      break;
    case ParamShape::Init::fan_in:
      if (auto it = arch.linear_plans_.find(name); it != arch.linear_plans_.end()) {
        const LinearPlan &plan = *it->second;
        for (const auto &b : plan.blocks()) {
          const double scale = 1.0 / std::sqrt(static_cast<double>(b.fan_in));
          const int count = b.fan_in * plan.out()[b.out_entry].mul;
          for (int i = 0; i < count; ++i)
            m.data[b.weight_offset + i] = static_cast<T>(scale * normal(rng));
        }
      } else {
        const double scale = 1.0 / std::sqrt(static_cast<double>(shape.fan_in));
        for (auto &v : m.data)
          v = static_cast<T>(scale * normal(rng));
      }
      break;
    }
    params.emplace(name, std::move(m));
  }
  return params;
}

/// Throws MismatchError unless `params` has exactly the architecture's keys
/// and shapes.
template <class T> void check_params(const Architecture &arch, const ParamMap<T> &params) {
  for (const auto &[name, shape] : arch.shapes()) {
    auto it = params.find(name);
    if (it == params.end())
      throw MismatchError("parameter \"" + name + "\" missing");
    if (it->second.rows != shape.rows || it->second.cols != shape.cols)
      throw MismatchError("parameter \"" + name + "\" has shape " +
                          std::to_string(it->second.rows) + "x" + std::to_string(it->second.cols) +
                          ", expected " + std::to_string(shape.rows) + "x" +
                          std::to_string(shape.cols));
  }
  for (const auto &[name, m] : params)
    if (!arch.shapes().count(name))
      throw MismatchError("unexpected parameter \"" + name + "\"");
}

/// Edge-independent inputs of one batch: vocabulary indices, gather maps,
/// distance features and spherical harmonics.
template <class T> struct BatchInputs {
  int num_nodes = 0;
  std::shared_ptr<const std::vector<int>> element, hydrogen, bond, src, dst, tp_node;
  Matrix<T> distance;  // E x (1 | n_rbf)
  Matrix<T> sh;        // E x (l_max+1)^2
};

/// Gaussian radial basis of a distance: n centres evenly spaced on
/// [0, r_cut], width r_cut / n.
inline std::vector<double> radial_basis(double d, int n, double r_cut) {
  std::vector<double> out(n);
  const double width = r_cut / n;
  for (int k = 0; k < n; ++k) {
    const double c = n == 1 ? 0.0 : r_cut * k / (n - 1);
    const double t = (d - c) / width;
    out[k] = std::exp(-0.5 * t * t);
  }
  return out;
}

template <class T>
BatchInputs<T> prepare_inputs(const Architecture &arch, const BatchGraph &g) {
  const auto &cfg = arch.config();
  BatchInputs<T> in;
  in.num_nodes = g.num_nodes();
  auto element = std::make_shared<std::vector<int>>();
  auto hydrogen = std::make_shared<std::vector<int>>();
  for (const auto &a : g.atoms) {
    element->push_back(arch.element_index(a.z));
    hydrogen->push_back(arch.hydrogen_index(a.n_hydrogens));
  }
  auto bond = std::make_shared<std::vector<int>>();
  auto src = std::make_shared<std::vector<int>>();
  auto dst = std::make_shared<std::vector<int>>();
  const int e_count = g.num_edges();
  const int dist_dim = cfg.n_rbf > 0 ? cfg.n_rbf : 1;
  in.distance = Matrix<T>(e_count, dist_dim);
  in.sh = Matrix<T>(e_count, sh_dim(cfg.l_max));
  for (int e = 0; e < e_count; ++e) {
    const auto &edge = g.edges[e];
    bond->push_back(static_cast<int>(edge.bond));
    src->push_back(edge.src);
    dst->push_back(edge.dst);
    if (cfg.n_rbf > 0) {
      auto rbf = radial_basis(edge.distance, cfg.n_rbf, cfg.r_cut);
      for (int k = 0; k < cfg.n_rbf; ++k)
        in.distance(e, k) = static_cast<T>(rbf[k]);
    } else {
      in.distance(e, 0) = static_cast<T>(edge.distance);
    }
    spherical_harmonics_into<T>(cfg.l_max, edge.unit_vec,
                                std::span<T>(in.sh.row(e), in.sh.cols));
  }
  in.element = element;
  in.hydrogen = hydrogen;
  in.bond = bond;
  in.src = src;
  in.dst = dst;
  in.tp_node = cfg.qkv_source == QkvSource::src ? in.src : in.dst;
  std::vector<bool> has_incoming(g.num_nodes(), false);
  for (int d : *dst)
    has_incoming[d] = true;
  for (int i = 0; i < g.num_nodes(); ++i)
    if (!has_incoming[i]) {
      log().warn("node {} has no neighbours; its aggregated message is zero", i);
      break;
    }
  return in;
}

/// Parameters placed on a tape.
using ParamVars = std::map<std::string, Var>;

template <class T>
ParamVars load_params(Tape<T> &tape, const ParamMap<T> &params, bool trainable) {
  ParamVars vars;
  for (const auto &[name, m] : params)
    vars[name] = trainable ? tape.variable(m) : tape.constant(m);
  return vars;
}

namespace detail {
inline Var param(const ParamVars &p, const std::string &name) {
  auto it = p.find(name);
  if (it == p.end())
    throw MismatchError("parameter \"" + name + "\" missing");
  return it->second;
}
inline Var optional_param(const ParamVars &p, const std::string &name) {
  auto it = p.find(name);
  return it == p.end() ? Var{} : it->second;
}
}  // namespace detail

/// Edge scalar features: bond-type embedding || distance features.
template <class T>
Var edge_scalar_features(Tape<T> &tape, const ParamVars &p, const BatchInputs<T> &in) {
  Var bond = ops::gather_rows(tape, detail::param(p, "embed.bond"), in.bond);
  return ops::concat_cols(tape, bond, tape.constant(in.distance));
}

/// Initial node features: element embedding || hydrogen-count embedding.
template <class T>
Var node_embedding_features(Tape<T> &tape, const ParamVars &p, const BatchInputs<T> &in) {
  Var z = ops::gather_rows(tape, detail::param(p, "embed.element"), in.element);
  Var h = ops::gather_rows(tape, detail::param(p, "embed.hydrogen"), in.hydrogen);
  return ops::concat_cols(tape, z, h);
}

template <class T>
Var weight_network(Tape<T> &tape, const ParamVars &p, const std::string &prefix, Var edge_scalars) {
  Var h = ops::dense(tape, edge_scalars, detail::param(p, prefix + ".0.weight"),
                     detail::param(p, prefix + ".0.bias"));
  h = ops::silu(tape, h);
  return ops::dense(tape, h, detail::param(p, prefix + ".1.weight"),
                    detail::param(p, prefix + ".1.bias"));
}

/// Attention weights of the most recent attention_layer call, for
/// inspection.
struct AttentionTrace {
  Var alpha;
};

/// One equivariant self-attention layer followed by the gated feed-forward
/// block, residual connection and layer normalization.
template <class T>
Var attention_layer(Tape<T> &tape, const Architecture &arch, int k, const ParamVars &p,
                    const BatchInputs<T> &in, Var x, Var edge_scalars,
                    AttentionTrace *trace = nullptr) {
  const auto &lp = arch.layers()[k];
  const std::string pre = "layer" + std::to_string(k) + ".";
  const auto &hidden = arch.hidden();

  Var q = ops::linear(tape, lp.query, x, detail::param(p, pre + "query.weight"), Var{});
  if (lp.pad_columns)
    q = ops::scatter_columns(tape, q, lp.pad_columns, hidden.dim());
  Var xs = ops::gather_rows(tape, x, in.tp_node);
  Var sh = tape.constant(in.sh);

  // q . L_k(k) == (L_k^T q) . k and sum_j a_j L_v(v_j) == L_v(sum_j a_j v_j):
  // both linear maps act per node instead of per edge.
  Var wk = weight_network(tape, p, pre + "key_net", edge_scalars);
  Var key = ops::tensor_product(tape, lp.tp, xs, sh, wk);
  Var wkey = detail::param(p, pre + "key_linear.weight");
  Var qk = ops::linear_adjoint(tape, lp.key_linear, q, wkey);
  Var qd = ops::gather_rows(tape, qk, in.dst);
  const T scale = T(1) / std::sqrt(static_cast<T>(hidden.dim()));
  Var logits = ops::row_dot(tape, qd, key, scale);
  Var alpha = ops::segment_softmax(tape, logits, in.dst, in.num_nodes);
  if (trace)
    trace->alpha = alpha;

  Var agg;
  if (arch.config().aggregate == AggregateMode::values) {
    Var wv = weight_network(tape, p, pre + "value_net", edge_scalars);
    Var value = ops::tensor_product(tape, lp.tp, xs, sh, wv);
    agg = ops::weighted_scatter_sum(tape, alpha, value, in.dst, in.num_nodes);
    agg = ops::linear(tape, lp.value_linear, agg, detail::param(p, pre + "value_linear.weight"),
                      Var{});
  } else {
    agg = ops::weighted_scatter_sum(tape, alpha, key, in.dst, in.num_nodes);
    agg = ops::linear(tape, lp.key_linear, agg, wkey, Var{});
  }

  Var h = ops::linear(tape, lp.ffn_in, agg, detail::param(p, pre + "ffn_in.weight"),
                      detail::optional_param(p, pre + "ffn_in.bias"));
  h = ops::gate(tape, lp.gate, h);
  h = ops::linear(tape, lp.ffn_out, h, detail::param(p, pre + "ffn_out.weight"),
                  detail::optional_param(p, pre + "ffn_out.bias"));

  Var skip = x;
  if (lp.skip) {
    skip = ops::linear(tape, lp.skip, x, detail::param(p, pre + "skip.weight"), Var{});
    skip = ops::scatter_columns(tape, skip, lp.pad_columns, hidden.dim());
  }
  return ops::layer_norm(tape, lp.norm, ops::add(tape, h, skip),
                         detail::param(p, pre + "norm.gain"));
}

/// Full network on a batch: returns the per-node [N x 2] output (column 0:
/// 13C, column 1: 1H; standardized units). Node states after every layer
/// are appended to `layer_states` when given.
template <class T>
Var forward(Tape<T> &tape, const Architecture &arch, const ParamVars &p, const BatchInputs<T> &in,
            std::vector<Var> *layer_states = nullptr) {
  Var x = node_embedding_features(tape, p, in);
  Var es = edge_scalar_features(tape, p, in);
  for (int k = 0; k < arch.config().n_layers; ++k) {
    x = attention_layer(tape, arch, k, p, in, x, es);
    if (layer_states)
      layer_states->push_back(x);
  }
  Var s = ops::linear(tape, arch.readout_ptr(), x, detail::param(p, "readout.linear.weight"),
                      detail::optional_param(p, "readout.linear.bias"));
  s = ops::dense(tape, s, detail::param(p, "readout.mlp.0.weight"),
                 detail::param(p, "readout.mlp.0.bias"));
  s = ops::silu(tape, s);
  return ops::dense(tape, s, detail::param(p, "readout.mlp.1.weight"),
                    detail::param(p, "readout.mlp.1.bias"));
}

/// Inference convenience: per-node [N x 2] standardized predictions.
template <class T>
Matrix<T> forward(const MolGraph &graph, const ParamMap<T> &params, const Architecture &arch,
                  std::vector<Matrix<T>> *layer_states = nullptr) {
  Tape<T> tape;
  auto p = load_params(tape, params, false);
  auto in = prepare_inputs<T>(arch, batch_graphs(graph));
  std::vector<Var> states;
  Var out = forward(tape, arch, p, in, layer_states ? &states : nullptr);
  if (layer_states)
    for (Var v : states)
      layer_states->push_back(tape.value(v));
  return tape.value(out);
}

/// Initial embedding of a single atom ("node_emb_dim x 0e").
template <class T>
GeometricTensor<T> node_embedding(const Atom &atom, const ParamMap<T> &params,
                                  const Architecture &arch) {
  const int half = arch.config().node_emb_dim / 2;
  const auto &ze = params.at("embed.element");
  const auto &he = params.at("embed.hydrogen");
  const int zi = arch.element_index(atom.z);
  const int hi = arch.hydrogen_index(atom.n_hydrogens);
  std::vector<T> data(ze.row(zi), ze.row(zi) + half);
  data.insert(data.end(), he.row(hi), he.row(hi) + half);
  return GeometricTensor<T>(
      IrrepsSignature({{arch.config().node_emb_dim, {0, Parity::even}}}), std::move(data));
}

/// Scalar features of one edge (length edge_emb_dim).
template <class T>
std::vector<T> edge_scalars(const Edge &edge, const ParamMap<T> &params, const Architecture &arch) {
  const auto &table = params.at("embed.bond");
  const T *row = table.row(static_cast<int>(edge.bond));
  std::vector<T> out(row, row + table.cols);
  if (arch.config().n_rbf > 0) {
    for (double v : radial_basis(edge.distance, arch.config().n_rbf, arch.config().r_cut))
      out.push_back(static_cast<T>(v));
  } else {
    out.push_back(static_cast<T>(edge.distance));
  }
  return out;
}

/// Spherical-harmonic embedding of an edge direction.
template <class T> GeometricTensor<T> edge_sh(const Edge &edge, int l_max) {
  return real_spherical_harmonics<T>(l_max, edge.unit_vec);
}

}  // namespace geqshift
