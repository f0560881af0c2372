//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <span>
#include <vector>

#include "geqshift/irreps.hpp"

namespace geqshift {

/// Flat feature vector typed by an irreps signature.
template <class T> class GeometricTensor {
 public:
  GeometricTensor() = default;
  explicit GeometricTensor(IrrepsSignature sig)
      : sig_(std::move(sig)), data_(static_cast<std::size_t>(sig_.dim()), T{}) {}
  GeometricTensor(IrrepsSignature sig, std::vector<T> data)
      : sig_(std::move(sig)), data_(std::move(data)) {
    if (static_cast<int>(data_.size()) != sig_.dim())
      throw ConfigError("geometric tensor data length " +
                        std::to_string(data_.size()) + " does not match " +
                        sig_.str() + " (dim " + std::to_string(sig_.dim()) +
                        ")");
  }

  const IrrepsSignature &signature() const { return sig_; }
  std::size_t size() const { return data_.size(); }
  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T &operator[](std::size_t i) { return data_[i]; }
  const T &operator[](std::size_t i) const { return data_[i]; }

  /// Components of channel `u` of entry `entry`.
  std::span<const T> block(std::size_t entry, int u) const {
    const auto &e = sig_[entry];
    return std::span<const T>(data_).subspan(
        sig_.offset(entry) + u * e.ir.dim(), e.ir.dim());
  }
  std::span<T> block(std::size_t entry, int u) {
    const auto &e = sig_[entry];
    return std::span<T>(data_).subspan(sig_.offset(entry) + u * e.ir.dim(),
                                       e.ir.dim());
  }

 private:
  IrrepsSignature sig_;
  std::vector<T> data_;
};

}  // namespace geqshift
