/* Copyright 2026 The swconv Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "swconv/error.hpp"
#include "swconv/rng.hpp"
#include "swconv/text.hpp"

namespace swconv {

/// How the fan-out maps are padded before shifting.
///   exact: maps live on an enlarged grid so every shifted read is real data.
///   half:  pad N//2, maps are H x W and shifted reads past the edge are zero.
///   full:  pad N-1; the working grid grows to H + ((N-1) - ceil(N/2)).
enum class PadMode : std::uint8_t { exact, half, full };

enum class OrderPolicy : std::uint8_t { ordered, disordered, per_edge_shuffled };

/// Source of the zero-shift centre branch.
enum class CenterMode : std::uint8_t { shared, independent };

/// The three branch types of one edge.
enum class BranchType : std::uint8_t { vertical = 0, horizontal = 1, center = 2 };
inline constexpr std::size_t kBranchTypes = 3;

inline const char* branch_name(BranchType t) {
  switch (t) {
    case BranchType::vertical: return "H";
    case BranchType::horizontal: return "W";
    case BranchType::center: return "center";
  }
  return "?";
}

inline constexpr std::uint8_t branch_bit(BranchType t) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(t)); }
inline constexpr std::uint8_t kAllBranches = 0b111;

inline const char* to_string(PadMode m) {
  switch (m) {
    case PadMode::exact: return "exact";
    case PadMode::half: return "half";
    case PadMode::full: return "full";
  }
  return "?";
}
inline const char* to_string(OrderPolicy p) {
  switch (p) {
    case OrderPolicy::ordered: return "ordered";
    case OrderPolicy::disordered: return "disordered";
    case OrderPolicy::per_edge_shuffled: return "per_edge_shuffled";
  }
  return "?";
}
inline const char* to_string(CenterMode m) { return m == CenterMode::shared ? "shared" : "independent"; }

inline PadMode parse_pad_mode(const std::string& s) {
  if (s == "exact") return PadMode::exact;
  if (s == "half") return PadMode::half;
  if (s == "full") return PadMode::full;
  throw ConfigError("unknown pad_mode '" + s + "'");
}
inline OrderPolicy parse_order_policy(const std::string& s) {
  if (s == "ordered") return OrderPolicy::ordered;
  if (s == "disordered") return OrderPolicy::disordered;
  if (s == "per_edge_shuffled" || s == "shuffled") return OrderPolicy::per_edge_shuffled;
  throw ConfigError("unknown order_policy '" + s + "'");
}
inline CenterMode parse_center_mode(const std::string& s) {
  if (s == "shared") return CenterMode::shared;
  if (s == "independent") return CenterMode::independent;
  throw ConfigError("unknown center_mode '" + s + "'");
}

/// Full description of one shiftwise operator instance.
struct SwConfig {
  std::size_t M = 1;  // long side of the emulated strip kernel
  std::size_t N = 1;  // short side, odd
  std::size_t C = 1;  // input channels
  double G = 0.0;     // ghost ratio in [0, 1)
  std::size_t E = 1;  // edges
  std::size_t b = 1;  // rep branches
  PadMode pad_mode = PadMode::half;
  OrderPolicy order_policy = OrderPolicy::ordered;
  std::uint64_t seed = kDefaultSeed;
  CenterMode center_mode = CenterMode::shared;
  std::uint8_t branches = kAllBranches;
  std::uint64_t layer_id = 0;
  double eps = 1e-5;  // normalization epsilon for freshly built norms

  /// g = ceil(M / N).
  std::size_t fanout() const { return (M + N - 1) / N; }
  /// delta_p = M//2 - N//2.
  std::size_t pad_delta() const { return M / 2 - N / 2; }
  /// Leading floor(G*C) channels bypass the operator.
  std::size_t ghost_channels() const {
    return static_cast<std::size_t>(std::floor(G * static_cast<double>(C) + 1e-9));
  }
  std::size_t sw_channels() const { return C - ghost_channels(); }
  std::size_t center_block() const { return fanout() / 2; }
  bool has_branch(BranchType t) const { return (branches & branch_bit(t)) != 0; }

  void validate() const {
    if (N == 0 || N % 2 == 0) throw ConfigError("N must be odd, got " + std::to_string(N));
    if (M < N) throw ConfigError("M must be at least N");
    if (C == 0) throw ConfigError("C must be positive");
    if (!(G >= 0.0 && G < 1.0)) throw ConfigError("G must lie in [0,1)");
    if (E == 0) throw ConfigError("E must be at least 1");
    if (b == 0) throw ConfigError("b must be at least 1");
    if (sw_channels() == 0) throw ConfigError("no channel left on the shiftwise path");
    if ((branches & kAllBranches) == 0 || (branches & ~kAllBranches) != 0)
      throw ConfigError("branch set must be a non-empty subset of {H,W,center}");
    if (!(eps >= 0.0)) throw ConfigError("eps must be non-negative");
  }

  bool operator==(const SwConfig&) const = default;
};

inline std::string branches_to_string(std::uint8_t bits) {
  std::string s;
  for (auto t : {BranchType::vertical, BranchType::horizontal, BranchType::center}) {
    if (bits & branch_bit(t)) {
      if (!s.empty()) s += ",";
      s += branch_name(t);
    }
  }
  return s;
}

inline std::uint8_t parse_branches(const std::string& s) {
  std::uint8_t bits = 0;
  for (const auto& part : split(s, ',')) {
    if (part == "H") bits |= branch_bit(BranchType::vertical);
    else if (part == "W") bits |= branch_bit(BranchType::horizontal);
    else if (part == "center") bits |= branch_bit(BranchType::center);
    else throw ConfigError("unknown branch '" + part + "'");
  }
  return bits;
}

/// Flat key=value text form. Required keys: M N C G E b pad_mode order_policy
/// seed. Optional: center_mode, branches, layer_id, eps.
inline std::string serialize(const SwConfig& c) {
  std::string s;
  s += "M=" + std::to_string(c.M) + "\n";
  s += "N=" + std::to_string(c.N) + "\n";
  s += "C=" + std::to_string(c.C) + "\n";
  s += "G=" + format_real(c.G) + "\n";
  s += "E=" + std::to_string(c.E) + "\n";
  s += "b=" + std::to_string(c.b) + "\n";
  s += std::string("pad_mode=") + to_string(c.pad_mode) + "\n";
  s += std::string("order_policy=") + to_string(c.order_policy) + "\n";
  s += "seed=" + std::to_string(c.seed) + "\n";
  s += std::string("center_mode=") + to_string(c.center_mode) + "\n";
  s += "branches=" + branches_to_string(c.branches) + "\n";
  s += "layer_id=" + std::to_string(c.layer_id) + "\n";
  s += "eps=" + format_real(c.eps) + "\n";
  return s;
}

inline SwConfig parse_sw_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    std::string key(trim(line.substr(0, eq)));
    std::string val(trim(line.substr(eq + 1)));
    if (!kv.emplace(key, val).second) throw ConfigError("duplicate key '" + key + "'");
  }
  auto take = [&](const char* key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(std::string("missing key '") + key + "'");
    auto v = it->second;
    kv.erase(it);
    return v;
  };
  auto take_opt = [&](const char* key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    auto v = it->second;
    kv.erase(it);
    return v;
  };
  SwConfig c;
  c.M = parse_int<std::size_t>(take("M"), "M");
  c.N = parse_int<std::size_t>(take("N"), "N");
  c.C = parse_int<std::size_t>(take("C"), "C");
  c.G = parse_real(take("G"), "G");
  c.E = parse_int<std::size_t>(take("E"), "E");
  c.b = parse_int<std::size_t>(take("b"), "b");
  c.pad_mode = parse_pad_mode(take("pad_mode"));
  c.order_policy = parse_order_policy(take("order_policy"));
  c.seed = parse_int<std::uint64_t>(take("seed"), "seed");
  if (auto v = take_opt("center_mode")) c.center_mode = parse_center_mode(*v);
  if (auto v = take_opt("branches")) c.branches = parse_branches(*v);
  if (auto v = take_opt("layer_id")) c.layer_id = parse_int<std::uint64_t>(*v, "layer_id");
  if (auto v = take_opt("eps")) c.eps = parse_real(*v, "eps");
  if (!kv.empty()) throw ConfigError("unknown key '" + kv.begin()->first + "'");
  c.validate();
  return c;
}

}  // namespace swconv
