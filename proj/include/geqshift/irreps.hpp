//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "geqshift/error.hpp"

namespace geqshift {

enum class Parity : int { even = 1, odd = -1 };

inline constexpr Parity operator*(Parity a, Parity b) {
  return static_cast<int>(a) * static_cast<int>(b) > 0 ? Parity::even
                                                       : Parity::odd;
}

/// An irreducible representation of O(3): rotation order l and parity.
struct Irrep {
  int l = 0;
  Parity parity = Parity::even;

  constexpr int dim() const { return 2 * l + 1; }
  constexpr bool is_scalar() const { return l == 0 && parity == Parity::even; }

  std::string str() const {
    return std::to_string(l) + (parity == Parity::even ? "e" : "o");
  }

  // Ordering used when grouping irreps by type: by l, even before odd.
  friend constexpr auto operator<=>(const Irrep &a, const Irrep &b) {
    if (a.l != b.l)
      return a.l <=> b.l;
    return static_cast<int>(b.parity) <=> static_cast<int>(a.parity);
  }
  friend constexpr bool operator==(const Irrep &, const Irrep &) = default;
};

/// Parity carried by spherical harmonics of degree l.
inline constexpr Parity sh_parity(int l) {
  return l % 2 == 0 ? Parity::even : Parity::odd;
}

struct IrrepsEntry {
  int mul = 1;
  Irrep ir;

  constexpr int dim() const { return mul * ir.dim(); }
  friend constexpr bool operator==(const IrrepsEntry &,
                                   const IrrepsEntry &) = default;
};

/// Ordered list of (multiplicity, irrep) blocks. A flat feature vector typed
/// by a signature stores its blocks in entry order; within an entry the
/// channels are contiguous and each channel stores m = -l..l contiguously.
class IrrepsSignature {
 public:
  IrrepsSignature() = default;
  explicit IrrepsSignature(std::vector<IrrepsEntry> entries)
      : entries_(std::move(entries)) {
    for (const auto &e : entries_)
      if (e.mul <= 0 || e.ir.l < 0)
        throw ConfigError("irreps entry with non-positive multiplicity or "
                          "negative l");
    rebuild_offsets();
  }

  /// Parses `mult "x" l ("e"|"o")` joined by "+". Whitespace around tokens
  /// is ignored.
  static IrrepsSignature parse(std::string_view text);

  const std::vector<IrrepsEntry> &entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const IrrepsEntry &operator[](std::size_t i) const { return entries_[i]; }

  int dim() const { return offsets_.empty() ? 0 : offsets_.back(); }
  int offset(std::size_t entry) const { return offsets_[entry]; }
  int num_channels() const {
    int n = 0;
    for (const auto &e : entries_)
      n += e.mul;
    return n;
  }
  int lmax() const {
    int l = -1;
    for (const auto &e : entries_)
      l = std::max(l, e.ir.l);
    return l;
  }

  bool has_type(const Irrep &ir) const {
    for (const auto &e : entries_)
      if (e.ir == ir)
        return true;
    return false;
  }
  int count(const Irrep &ir) const {
    int n = 0;
    for (const auto &e : entries_)
      if (e.ir == ir)
        n += e.mul;
    return n;
  }

  /// Keeps only entries with l <= lmax.
  IrrepsSignature filter_lmax(int lmax) const {
    std::vector<IrrepsEntry> out;
    for (const auto &e : entries_)
      if (e.ir.l <= lmax)
        out.push_back(e);
    return IrrepsSignature(std::move(out));
  }

  /// Keeps only entries whose type is present in `types`.
  IrrepsSignature filter_types(const IrrepsSignature &types) const {
    std::vector<IrrepsEntry> out;
    for (const auto &e : entries_)
      if (types.has_type(e.ir))
        out.push_back(e);
    return IrrepsSignature(std::move(out));
  }

  std::string str() const {
    std::string s;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (i)
        s += '+';
      s += std::to_string(entries_[i].mul) + 'x' + entries_[i].ir.str();
    }
    return s;
  }

  friend bool operator==(const IrrepsSignature &a, const IrrepsSignature &b) {
    return a.entries_ == b.entries_;
  }

 private:
  void rebuild_offsets() {
    offsets_.assign(1, 0);
    for (const auto &e : entries_)
      offsets_.push_back(offsets_.back() + e.dim());
  }

  std::vector<IrrepsEntry> entries_;
  std::vector<int> offsets_{0};
};

/// Signature of spherical harmonics up to lmax: 1x0e+1x1o+1x2e+...
inline IrrepsSignature sh_signature(int lmax) {
  std::vector<IrrepsEntry> e;
  for (int l = 0; l <= lmax; ++l)
    e.push_back({1, {l, sh_parity(l)}});
  return IrrepsSignature(std::move(e));
}

inline IrrepsSignature IrrepsSignature::parse(std::string_view text) {
  std::vector<IrrepsEntry> entries;
  std::size_t pos = 0;
  auto fail = [&](std::size_t begin, std::size_t end, const char *what) {
    end = std::min(end, text.size());
    throw ParseError("invalid irreps signature \"" + std::string(text) +
                     "\": " + what + " at [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") \"" +
                     std::string(text.substr(begin, end - begin)) + "\"");
  };
  auto skip_ws = [&] {
    while (pos < text.size() &&
           std::isspace(static_cast<unsigned char>(text[pos])))
      ++pos;
  };
  auto read_int = [&](const char *what) {
    std::size_t begin = pos;
    long value = 0;
    while (pos < text.size() &&
           std::isdigit(static_cast<unsigned char>(text[pos]))) {
      value = value * 10 + (text[pos] - '0');
      if (value > 1'000'000)
        fail(begin, pos + 1, "integer out of range");
      ++pos;
    }
    if (pos == begin)
      fail(begin, begin + 1, what);
    return static_cast<int>(value);
  };

  skip_ws();
  if (pos == text.size())
    fail(0, 0, "empty signature");
  while (true) {
    skip_ws();
    std::size_t token_begin = pos;
    int mul = read_int("expected multiplicity");
    if (mul == 0)
      fail(token_begin, pos, "multiplicity must be positive");
    if (pos >= text.size() || text[pos] != 'x')
      fail(token_begin, pos + 1, "expected 'x' after multiplicity");
    ++pos;
    int l = read_int("expected rotation order");
    if (pos >= text.size() || (text[pos] != 'e' && text[pos] != 'o'))
      fail(token_begin, pos + 1, "expected parity 'e' or 'o'");
    Parity p = text[pos] == 'e' ? Parity::even : Parity::odd;
    ++pos;
    entries.push_back({mul, {l, p}});
    skip_ws();
    if (pos == text.size())
      break;
    if (text[pos] != '+')
      fail(pos, pos + 1, "expected '+'");
    ++pos;
  }
  return IrrepsSignature(std::move(entries));
}

}  // namespace geqshift
