//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <stdexcept>
#include <string>

namespace geqshift {

// Malformed text (irreps signatures, config values).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs that violate a documented invariant: dataset records, splits,
// geometry. The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent construction parameters (signatures that cannot be wired
// together, wrong weight counts, unknown vocabulary entries).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Zero-length or otherwise unusable direction / coincident atoms.
class DegenerateGeometryError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InvalidRotationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf encountered during training. Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint/config incompatibility. Exit code 4.
class MismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace geqshift
