//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "geqshift/error.hpp"

namespace geqshift::csv {

/// Quotes a field if it contains a comma, quote or newline.
inline std::string field(const std::string &s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + '"';
}

/// Text that reads back as the same double.
inline std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_line(const std::string &line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted)
    throw ParseError("unterminated quoted CSV field");
  out.push_back(std::move(cur));
  return out;
}

inline double parse_double(const std::string &s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception &) {
    throw ParseError("invalid number \"" + s + "\" in CSV");
  }
  if (used != s.size())
    throw ParseError("invalid number \"" + s + "\" in CSV");
  return v;
}

}  // namespace geqshift::csv
