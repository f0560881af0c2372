//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <memory>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace geqshift {

/// Library-wide logger writing to stderr.
inline spdlog::logger &log() {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto existing = spdlog::get("geqshift");
    if (existing)
      return existing;
    auto l = spdlog::stderr_color_mt("geqshift");
    l->set_pattern("[%l] %v");
    return l;
  }();
  return *logger;
}

}  // namespace geqshift
