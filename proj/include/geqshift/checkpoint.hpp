//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geqshift/model.hpp"

namespace geqshift {

/// Per-nucleus z-score constants (index 0: 13C, 1: 1H).
struct Standardization {
  double mean[2] = {0.0, 0.0};
  double std[2] = {1.0, 1.0};

  double standardize(double ppm, Nucleus n) const {
    const int k = static_cast<int>(n);
    return (ppm - mean[k]) / std[k];
  }
  double destandardize(double z, Nucleus n) const {
    const int k = static_cast<int>(n);
    return z * std[k] + mean[k];
  }
  friend bool operator==(const Standardization &a, const Standardization &b) {
    return a.mean[0] == b.mean[0] && a.mean[1] == b.mean[1] && a.std[0] == b.std[0] &&
           a.std[1] == b.std[1];
  }
};

/// Mean and population std of the labels of each nucleus. A nucleus with
/// fewer than two labels, or zero spread, keeps unit scale.
inline Standardization compute_standardization(const std::vector<MoleculeRecord> &records) {
  Standardization s;
  for (int k = 0; k < 2; ++k) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto &r : records)
      for (const auto &l : r.labels)
        if (static_cast<int>(l.nucleus) == k) {
          sum += l.shift_ppm;
          ++n;
        }
    if (n == 0)
      continue;
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto &r : records)
      for (const auto &l : r.labels)
        if (static_cast<int>(l.nucleus) == k)
          ss += (l.shift_ppm - mean) * (l.shift_ppm - mean);
    const double sd = std::sqrt(ss / n);
    s.mean[k] = mean;
    s.std[k] = (n >= 2 && sd > 0.0) ? sd : 1.0;
  }
  return s;
}

inline nlohmann::json to_json(const Standardization &s) {
  return {{"C", {{"mean", s.mean[0]}, {"std", s.std[0]}}},
          {"H", {{"mean", s.mean[1]}, {"std", s.std[1]}}}};
}

inline Standardization standardization_from_json(const nlohmann::json &j) {
  Standardization s;
  s.mean[0] = j.at("C").at("mean").get<double>();
  s.std[0] = j.at("C").at("std").get<double>();
  s.mean[1] = j.at("H").at("mean").get<double>();
  s.std[1] = j.at("H").at("std").get<double>();
  if (!(s.std[0] > 0) || !(s.std[1] > 0))
    throw MismatchError("checkpoint standardization has a non-positive std");
  return s;
}

template <class T> struct Checkpoint {
  ModelConfig config;
  Standardization standardization;
  ParamMap<T> params;
  nlohmann::json metadata = nlohmann::json::object();
};

inline constexpr char checkpoint_magic[8] = {'G', 'E', 'Q', 'S', 'H', 'F', 'T', '\0'};
inline constexpr int checkpoint_version = 1;

namespace detail {

inline void put_u64(std::string &out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(const char *p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

inline void put_f32(std::string &out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline float get_f32(const char *p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i)
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace detail

/// Layout: 8-byte magic, u64 header length, JSON header, then the arrays as
/// little-endian float32 in header order. Written to a temporary file and
/// renamed into place.
template <class T> std::string serialize_checkpoint(const Checkpoint<T> &ck) {
  Architecture arch(ck.config);
  check_params(arch, ck.params);
  nlohmann::json header;
  header["format_version"] = checkpoint_version;
  header["model_config"] = to_json(ck.config);
  std::vector<std::string> sigs;
  for (const auto &s : arch.layer_signatures())
    sigs.push_back(s.str());
  header["layer_signatures"] = sigs;
  header["standardization"] = to_json(ck.standardization);
  header["metadata"] = ck.metadata;
  nlohmann::json arrays = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto &[name, m] : ck.params) {
    arrays.push_back({{"name", name}, {"rows", m.rows}, {"cols", m.cols}, {"offset", offset}});
    offset += m.size();
  }
  header["arrays"] = arrays;
  const std::string text = header.dump();

  std::string out(checkpoint_magic, sizeof checkpoint_magic);
  detail::put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + 4 * offset);
  for (const auto &[name, m] : ck.params)
    for (T v : m.data)
      detail::put_f32(out, static_cast<float>(v));
  return out;
}

template <class T>
Checkpoint<T> deserialize_checkpoint(const std::string &bytes, const std::string &where = "checkpoint") {
  const std::size_t head = sizeof checkpoint_magic + 8;
  if (bytes.size() < head || std::memcmp(bytes.data(), checkpoint_magic, sizeof checkpoint_magic) != 0)
    throw MismatchError(where + ": not a checkpoint file");
  const std::uint64_t len = detail::get_u64(bytes.data() + sizeof checkpoint_magic);
  if (bytes.size() < head + len)
    throw MismatchError(where + ": truncated header");
  nlohmann::json header;
  Checkpoint<T> ck;
  try {
    header = nlohmann::json::parse(bytes.substr(head, len));
    if (header.at("format_version").get<int>() != checkpoint_version)
      throw MismatchError(where + ": unsupported format version " +
                          header.at("format_version").dump());
    ck.config = model_config_from_json(header.at("model_config"));
    ck.standardization = standardization_from_json(header.at("standardization"));
    if (header.contains("metadata"))
      ck.metadata = header.at("metadata");
  } catch (const nlohmann::json::exception &e) {
    throw MismatchError(where + ": invalid header: " + e.what());
  } catch (const ConfigError &e) {
    throw MismatchError(where + ": " + e.what());
  }
  Architecture arch(ck.config);
  std::vector<std::string> expected;
  for (const auto &s : arch.layer_signatures())
    expected.push_back(s.str());
  if (header.at("layer_signatures").get<std::vector<std::string>>() != expected)
    throw MismatchError(where + ": layer signatures do not match the stored model config");

  const std::size_t data_begin = head + len;
  const std::size_t n_floats = (bytes.size() - data_begin) / 4;
  for (const auto &a : header.at("arrays")) {
    const auto name = a.at("name").get<std::string>();
    const int rows = a.at("rows").get<int>();
    const int cols = a.at("cols").get<int>();
    const auto offset = a.at("offset").get<std::uint64_t>();
    const std::size_t count = static_cast<std::size_t>(rows) * cols;
    if (offset + count > n_floats)
      throw MismatchError(where + ": array \"" + name + "\" runs past the end of the file");
    Matrix<T> m(rows, cols);
    const char *p = bytes.data() + data_begin + 4 * offset;
    for (std::size_t i = 0; i < count; ++i)
      m.data[i] = static_cast<T>(detail::get_f32(p + 4 * i));
    ck.params.emplace(name, std::move(m));
  }
  check_params(arch, ck.params);
  return ck;
}

template <class T>
void save_checkpoint(const Checkpoint<T> &ck, const std::filesystem::path &path) {
  const std::string bytes = serialize_checkpoint(ck);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw ValidationError("cannot write checkpoint " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
      throw ValidationError("error writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <class T> Checkpoint<T> load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ValidationError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint<T>(bytes, path.string());
}

/// Rounds every parameter through float32, the precision checkpoints store.
template <class T> ParamMap<T> round_to_storage(ParamMap<T> params) {
  for (auto &[name, m] : params)
    for (auto &v : m.data)
      v = static_cast<T>(static_cast<float>(v));
  return params;
}

}  // namespace geqshift
