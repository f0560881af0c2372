//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "geqshift/error.hpp"
#include "geqshift/model.hpp"
#include "geqshift/training.hpp"

namespace geqshift {

/// One row of the ablation grid: what the model sees at train and test time.
struct ModePreset {
  const char *name;
  int l_max;
  int n_conformers_train;
  int n_conformers_test;
};

inline constexpr std::array<ModePreset, 6> mode_presets{{
    {"GeqShift", 2, 100, 100},
    {"GeqShift_inv", 0, 100, 100},
    {"GeqShift_1T", 2, 100, 1},
    {"GeqShift_1T_inv", 0, 100, 1},
    {"GeqShift_1TT", 2, 1, 1},
    {"GeqShift_1TT_inv", 0, 1, 1},
}};

inline const ModePreset &find_mode(const std::string &name) {
  for (const auto &m : mode_presets)
    if (name == m.name)
      return m;
  std::string known;
  for (const auto &m : mode_presets)
    known += std::string(known.empty() ? "" : ", ") + m.name;
  throw ConfigError("unknown mode \"" + name + "\" (expected one of " + known + ")");
}

enum class Precision { f32, f64 };

inline Precision parse_precision(int bits) {
  if (bits == 32)
    return Precision::f32;
  if (bits == 64)
    return Precision::f64;
  throw ConfigError("precision must be 32 or 64, got " + std::to_string(bits));
}

/// Everything a train/cv run needs. `mode`, when set, fixes l_max, the
/// conformer counts and the schedule; contradicting keys are an error.
struct RunConfig {
  std::optional<std::string> mode;
  std::string dataset;
  std::string splits;
  Precision precision = Precision::f64;
  std::optional<std::uint64_t> seed;
  int n_conformers_test = 100;
  ModelConfig model;
  TrainConfig train;

  /// Applies the mode preset and the shared seed. Call after every override.
  void resolve() {
    if (seed) {
      model.seed = *seed;
      train.seed = *seed;
    }
    if (!mode)
      return;
    const auto &m = find_mode(*mode);
    model.l_max = m.l_max;
    train.n_conformers_train = m.n_conformers_train;
    n_conformers_test = m.n_conformers_test;
    // ensemble training runs the 3-epoch step decay, single-conformer
    // training the plateau schedule
    train.schedule = m.n_conformers_train == 1 ? ScheduleKind::plateau : ScheduleKind::step;
  }

  void validate() const {
    model.validate();
    train.validate();
    if (n_conformers_test <= 0)
      throw ConfigError("n_conformers_test must be positive");
  }
};

inline nlohmann::json to_json(const RunConfig &c) {
  nlohmann::json j = {{"dataset", c.dataset},
                      {"splits", c.splits},
                      {"precision", c.precision == Precision::f32 ? 32 : 64},
                      {"n_conformers_test", c.n_conformers_test},
                      {"model", to_json(c.model)},
                      {"train", to_json(c.train)}};
  j["mode"] = c.mode ? nlohmann::json(*c.mode) : nlohmann::json(nullptr);
  j["seed"] = c.seed ? nlohmann::json(*c.seed) : nlohmann::json(nullptr);
  return j;
}

namespace detail {

inline void check_mode_conflicts(const std::string &mode, const nlohmann::json &j) {
  const auto &m = find_mode(mode);
  auto clash = [&](const char *section, const char *key, const nlohmann::json &want) {
    if (j.contains(section) && j[section].contains(key) && j[section][key] != want)
      throw ConfigError(std::string(section) + "." + key + " = " + j[section][key].dump() +
                        " contradicts mode " + mode + " (" + want.dump() + ")");
  };
  clash("model", "l_max", m.l_max);
  clash("train", "n_conformers_train", m.n_conformers_train);
  clash("train", "schedule", m.n_conformers_train == 1 ? "plateau" : "step");
  if (j.contains("n_conformers_test") && j["n_conformers_test"] != m.n_conformers_test)
    throw ConfigError("n_conformers_test contradicts mode " + mode);
}

}  // namespace detail

/// Merges `j` into `c`. Unknown keys are rejected.
inline void update_from_json(RunConfig &c, const nlohmann::json &j) {
  if (!j.is_object())
    throw ConfigError("run config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto &k = it.key();
    const auto &v = it.value();
    try {
      if (k == "mode") {
        if (v.is_null())
          c.mode.reset();
        else
          c.mode = v.get<std::string>();
      } else if (k == "dataset") {
        c.dataset = v.get<std::string>();
      } else if (k == "splits") {
        c.splits = v.get<std::string>();
      } else if (k == "precision") {
        c.precision = parse_precision(v.get<int>());
      } else if (k == "seed") {
        if (v.is_null())
          c.seed.reset();
        else
          c.seed = v.get<std::uint64_t>();
      } else if (k == "n_conformers_test") {
        c.n_conformers_test = v.get<int>();
      } else if (k == "model") {
        update_from_json(c.model, v);
      } else if (k == "train") {
        update_from_json(c.train, v);
      } else {
        throw ConfigError("unknown run config key \"" + k + "\"");
      }
    } catch (const nlohmann::json::exception &e) {
      throw ConfigError("run config key \"" + k + "\": " + e.what());
    }
  }
  if (c.mode)
    detail::check_mode_conflicts(*c.mode, j);
}

inline RunConfig load_run_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  RunConfig c;
  update_from_json(c, j);
  return c;
}

}  // namespace geqshift
