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

// Four-stage network description and its parameter / MAC accounting.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "swconv/conv_ref.hpp"
#include "swconv/error.hpp"
#include "swconv/reparam.hpp"
#include "swconv/sw_config.hpp"
#include "swconv/sw_op.hpp"
#include "swconv/text.hpp"

namespace swconv {

struct ArchSpec {
  std::array<std::size_t, 4> depths{3, 3, 18, 3};
  std::array<std::size_t, 4> dims{80, 160, 320, 640};
  std::array<std::size_t, 4> stage_M{51, 49, 47, 13};
  std::size_t N = 3;
  double R = 1.3;
  double G = 0.23;
  bool compensate = true;  // require R(1-G) = 1 within rounding
  std::size_t E = 4;
  std::size_t b = 2;
  std::size_t ffn_ratio = 4;
  std::size_t in_chans = 3;
  std::size_t num_classes = 1000;
  bool se = false;
  std::size_t se_ratio = 4;

  std::size_t layers() const { return depths[0] + depths[1] + depths[2] + depths[3]; }
  std::size_t stage_of(std::size_t layer) const {
    std::size_t acc = 0;
    for (std::size_t s = 0; s < 4; ++s) {
      acc += depths[s];
      if (layer < acc) return s;
    }
    throw IndexError("layer " + std::to_string(layer) + " out of range");
  }

  /// Operator config of SW layer `layer` (global depth index).
  SwConfig layer_config(std::size_t layer) const {
    const auto s = stage_of(layer);
    SwConfig c;
    c.M = stage_M[s];
    c.N = N;
    c.C = dims[s];
    c.G = G;
    c.E = E;
    c.b = b;
    c.layer_id = layer;
    return c;
  }

  void validate() const {
    for (std::size_t s = 0; s < 4; ++s) {
      if (depths[s] == 0) throw ConfigError("stage depth must be positive");
      if (s > 0 && dims[s] != 2 * dims[s - 1]) throw ConfigError("dims must double per stage");
      layer_config(0).validate();
    }
    if (dims[0] % 2) throw ConfigError("dims[0] must be even (stem halves it)");
    if (R < 1.0) throw ConfigError("R must be at least 1");
    if (compensate && std::fabs(R * (1.0 - G) - 1.0) > 0.005)
      throw ConfigError("R(1-G) must equal 1 within rounding, got " + format_real(R * (1.0 - G)));
    for (std::size_t l = 0; l < layers(); ++l) layer_config(l).validate();
  }

  static ArchSpec sw_tiny() { return {}; }
  static ArchSpec sw_small() {
    ArchSpec a;
    a.depths = {3, 3, 27, 3};
    a.dims = {96, 192, 384, 768};
    return a;
  }
};

namespace detail {
template <std::size_t K>
std::array<std::size_t, K> parse_list(const std::string& v, const char* key) {
  const auto parts = split(v, ',');
  if (parts.size() != K) throw ConfigError(std::string(key) + " needs " + std::to_string(K) + " values");
  std::array<std::size_t, K> out{};
  for (std::size_t i = 0; i < K; ++i) out[i] = parse_int<std::size_t>(trim(parts[i]), key);
  return out;
}
inline std::string join(const std::array<std::size_t, 4>& a) {
  return std::to_string(a[0]) + "," + std::to_string(a[1]) + "," + std::to_string(a[2]) + "," + std::to_string(a[3]);
}
}  // namespace detail

/// key=value text; unspecified keys keep the SW-tiny defaults. `preset=small`
/// switches the base before other keys apply.
inline ArchSpec parse_arch_spec(const std::string& text) {
  std::map<std::string, std::string> kv;
  for (const auto& raw : split(text, '\n')) {
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key=value in arch spec");
    if (!kv.emplace(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1)))).second)
      throw ConfigError("duplicate arch key");
  }
  ArchSpec a;
  if (auto it = kv.find("preset"); it != kv.end()) {
    if (it->second == "small") a = ArchSpec::sw_small();
    else if (it->second != "tiny") throw ConfigError("unknown preset '" + it->second + "'");
    kv.erase(it);
  }
  for (const auto& [k, v] : kv) {
    if (k == "depths") a.depths = detail::parse_list<4>(v, "depths");
    else if (k == "dims") a.dims = detail::parse_list<4>(v, "dims");
    else if (k == "M") a.stage_M = detail::parse_list<4>(v, "M");
    else if (k == "N") a.N = parse_int<std::size_t>(v, "N");
    else if (k == "R") a.R = parse_real(v, "R");
    else if (k == "G") a.G = parse_real(v, "G");
    else if (k == "compensate") a.compensate = parse_int<int>(v, "compensate") != 0;
    else if (k == "E") a.E = parse_int<std::size_t>(v, "E");
    else if (k == "b") a.b = parse_int<std::size_t>(v, "b");
    else if (k == "ffn_ratio") a.ffn_ratio = parse_int<std::size_t>(v, "ffn_ratio");
    else if (k == "in_chans") a.in_chans = parse_int<std::size_t>(v, "in_chans");
    else if (k == "num_classes") a.num_classes = parse_int<std::size_t>(v, "num_classes");
    else if (k == "se") a.se = parse_int<int>(v, "se") != 0;
    else throw ConfigError("unknown arch key '" + k + "'");
  }
  a.validate();
  return a;
}

inline std::string serialize(const ArchSpec& a) {
  std::string s;
  s += "depths=" + detail::join(a.depths) + "\n";
  s += "dims=" + detail::join(a.dims) + "\n";
  s += "M=" + detail::join(a.stage_M) + "\n";
  s += "N=" + std::to_string(a.N) + "\n";
  s += "R=" + format_real(a.R) + "\n";
  s += "G=" + format_real(a.G) + "\n";
  s += "compensate=" + std::to_string(a.compensate ? 1 : 0) + "\n";
  s += "E=" + std::to_string(a.E) + "\n";
  s += "b=" + std::to_string(a.b) + "\n";
  s += "ffn_ratio=" + std::to_string(a.ffn_ratio) + "\n";
  s += "in_chans=" + std::to_string(a.in_chans) + "\n";
  s += "num_classes=" + std::to_string(a.num_classes) + "\n";
  s += "se=" + std::to_string(a.se ? 1 : 0) + "\n";
  return s;
}

struct CountRow {
  std::string layer;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

struct CountReport {
  std::vector<CountRow> rows;
  std::uint64_t total_params() const {
    std::uint64_t t = 0;
    for (const auto& r : rows) t += r.params;
    return t;
  }
  std::uint64_t total_macs() const {
    std::uint64_t t = 0;
    for (const auto& r : rows) t += r.macs;
    return t;
  }
};

namespace detail {

struct Walker {
  CountReport rep;
  std::size_t h, w;

  static std::size_t down(std::size_t x) { return detail::conv_out_extent(x, 1, 1, 3, 2); }

  // Dense conv / linear layer with bias. Advances the spatial size for stride 2.
  void conv(const std::string& name, std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride,
            std::size_t groups = 1) {
    const std::size_t oh = stride == 2 ? down(h) : h;
    const std::size_t ow = stride == 2 ? down(w) : w;
    const std::uint64_t per = static_cast<std::uint64_t>(cin / groups) * k * k;
    rep.rows.push_back({name, per * cout + cout, per * cout * oh * ow});
    h = oh;
    w = ow;
  }
  void norm(const std::string& name, std::size_t c) { rep.rows.push_back({name, 2ull * c, 0}); }
};

}  // namespace detail

/// Deploy-form counts (rep branches merged, masks ignored) for a square
/// input of side `input_size`. Block: SW operator, norm, pointwise FFN with
/// ratio ffn_ratio, layer scale. Stem: two stride-2 3x3 convs with norms.
/// Transitions: norm + stride-2 3x3 conv. Head: norm + linear.
inline CountReport count_arch(const ArchSpec& a, std::size_t input_size = 224) {
  a.validate();
  detail::Walker wk{{}, input_size, input_size};
  const std::size_t c0 = a.dims[0];
  wk.conv("stem.conv0", a.in_chans, c0 / 2, 3, 2);
  wk.norm("stem.norm0", c0 / 2);
  wk.conv("stem.conv1", c0 / 2, c0, 3, 2);
  wk.norm("stem.norm1", c0);
  std::size_t layer = 0;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t c = a.dims[s];
    if (s > 0) {
      const std::string p = "down" + std::to_string(s);
      wk.norm(p + ".norm", a.dims[s - 1]);
      wk.conv(p + ".conv", a.dims[s - 1], c, 3, 2);
    }
    for (std::size_t d = 0; d < a.depths[s]; ++d, ++layer) {
      const std::string p = "stage" + std::to_string(s) + ".block" + std::to_string(d);
      const auto cfg = a.layer_config(layer);
      const std::uint64_t cs = cfg.sw_channels();
      const std::uint64_t bank = cs * cfg.fanout() * cfg.N * cfg.N;
      wk.rep.rows.push_back({p + ".sw", bank + 2 * cs * kBranchTypes, bank * wk.h * wk.w});
      if (a.se) {
        const std::uint64_t r = c / a.se_ratio;
        wk.rep.rows.push_back({p + ".se", c * r + r + r * c + c, c * r + r * c});
      }
      wk.norm(p + ".norm", c);
      wk.conv(p + ".pw1", c, a.ffn_ratio * c, 1, 1);
      wk.conv(p + ".pw2", a.ffn_ratio * c, c, 1, 1);
      wk.rep.rows.push_back({p + ".scale", c, 0});
    }
  }
  const std::size_t cl = a.dims[3];
  wk.norm("head.norm", cl);
  wk.rep.rows.push_back({"head.fc", static_cast<std::uint64_t>(cl) * a.num_classes + a.num_classes,
                         static_cast<std::uint64_t>(cl) * a.num_classes});
  return wk.rep;
}

inline CountReport count_params(const ArchSpec& a) { return count_arch(a, 224); }
inline CountReport count_macs(const ArchSpec& a, std::size_t input_size) { return count_arch(a, input_size); }

/// Per-stage fan-out g = ceil(M/N).
inline std::array<std::size_t, 4> stage_fanouts(const ArchSpec& a) {
  std::array<std::size_t, 4> g{};
  for (std::size_t s = 0; s < 4; ++s) g[s] = (a.stage_M[s] + a.N - 1) / a.N;
  return g;
}

// ---------------------------------------------------------------------------
// Replacement-experiment counts (#0-#7) on the two-strip branch.

struct CostSetup {
  std::size_t H = 56, W = 56;
  std::size_t M = 51, N = 5;
  std::size_t C = 8;
  double G = 0.23;
  std::uint64_t seed = kDefaultSeed;
};

struct CostRow {
  std::string id;
  std::string label;
  std::uint64_t closed_macs = 0;
  std::uint64_t counted_macs = 0;
  std::uint64_t closed_params = 0;
  std::uint64_t counted_params = 0;
};

/// H'' - H for pad N-1: (N-1) - ceil(N/2), floored at 0.
inline std::size_t full_pad_growth(std::size_t n) {
  const auto g = static_cast<std::ptrdiff_t>(n - 1) - static_cast<std::ptrdiff_t>((n + 1) / 2);
  return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, g));
}

namespace detail {

inline std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

inline std::uint64_t sw_counted_macs(const CostSetup& t, std::size_t n, double g, PadMode pm, std::size_t b,
                                     const Tensor<double>& x, std::uint64_t& params, bool norms) {
  SwConfig cfg;
  cfg.M = t.M;
  cfg.N = n;
  cfg.C = t.C;
  cfg.G = g;
  cfg.b = b;
  cfg.pad_mode = pm;
  cfg.seed = t.seed;
  auto w = random_sw_weights<double>(cfg, t.seed);
  SwCounters ctr;
  sw_forward(x, w, cfg, build_shift_plan(cfg), ForwardMode::inference, &ctr);
  params = merged_bank(w).size() + (norms ? 2 * cfg.sw_channels() * kBranchTypes : 0);
  return ctr.conv.macs;
}

}  // namespace detail

/// Closed forms (evaluated per channel and multiplied by the channel count)
/// alongside MACs counted by running the actual kernels. #5 adds the norm
/// term to params only; #6/#7 use the integer SW channel count for (1-G).
inline std::vector<CostRow> cost_table_rows(const CostSetup& t) {
  using detail::ceil_div;
  const std::uint64_t H = t.H, W = t.W, M = t.M, N = t.N, C = t.C;
  const std::uint64_t g = ceil_div(M, N);
  const std::uint64_t dp = M / 2 - N / 2;
  const std::uint64_t e = full_pad_growth(t.N);
  SwConfig probe;
  probe.C = t.C;
  probe.G = t.G;
  const std::uint64_t cs = probe.sw_channels();
  const std::uint64_t g3 = ceil_div(M, 3);

  std::vector<CostRow> rows;
  const auto x = [&] {
    Tensor<double> v(Shape{static_cast<std::int64_t>(C), static_cast<std::int64_t>(H), static_cast<std::int64_t>(W)});
    CounterRng rng({t.seed, 0x7431});
    for (auto& a : v.data()) a = rng.uniform(-1, 1);
    return v;
  }();

  {  // #0: vertical M x N and horizontal N x M strips.
    MacCounter mc;
    Tensor<double> kv(Shape{static_cast<std::int64_t>(C), static_cast<std::int64_t>(M), static_cast<std::int64_t>(N)});
    Tensor<double> kh(Shape{static_cast<std::int64_t>(C), static_cast<std::int64_t>(N), static_cast<std::int64_t>(M)});
    strip_conv_ref(x, kv, std::nullopt, &mc);
    strip_conv_ref(x, kh, std::nullopt, &mc);
    rows.push_back({"#0", "two strips", H * W * M * N * 2 * C, mc.macs, M * N * 2 * C, kv.size() + kh.size()});
  }
  {  // #1: laid out on the H' = H + delta_p grid, two separate fan-out banks.
    MacCounter mc;
    Tensor<double> bank(Shape{static_cast<std::int64_t>(C), static_cast<std::int64_t>(g), static_cast<std::int64_t>(N),
                              static_cast<std::int64_t>(N)});
    const Padding pad{t.N / 2 + dp, t.N / 2, t.N / 2 + dp, t.N / 2};
    fanout_conv(x, bank, pad, &mc);
    fanout_conv(x, bank, pad, &mc);
    rows.push_back({"#1", "laid out", (H + dp) * (W + dp) * g * N * N * 2 * C, mc.macs, g * N * N * 2 * C, 2 * bank.size()});
  }
  std::uint64_t p = 0;
  {
    const auto m = detail::sw_counted_macs(t, t.N, 0.0, PadMode::full, 1, x, p, false);
    rows.push_back({"#2", "shared conv, pad N-1", (H + e) * (W + e) * g * N * N * C, m, g * N * N * C, p});
  }
  {
    const auto m = detail::sw_counted_macs(t, t.N, 0.0, PadMode::half, 1, x, p, false);
    rows.push_back({"#3", "shared conv, pad N//2", H * W * g * N * N * C, m, g * N * N * C, p});
  }
  {
    const auto m = detail::sw_counted_macs(t, t.N, 0.0, PadMode::half, 2, x, p, false);
    rows.push_back({"#4", "rep x2 merged", H * W * g * N * N * C, m, g * N * N * C, p});
  }
  {
    const auto m = detail::sw_counted_macs(t, t.N, 0.0, PadMode::half, 2, x, p, true);
    rows.push_back({"#5", "norm after branches", H * W * g * N * N * C, m, g * N * N * C + C * 2 * 3, p});
  }
  {
    const auto m = detail::sw_counted_macs(t, t.N, t.G, PadMode::half, 2, x, p, true);
    rows.push_back({"#6", "ghost G", H * W * g * N * N * cs, m, (g * N * N + 2 * 3) * cs, p});
  }
  {
    const auto m = detail::sw_counted_macs(t, 3, t.G, PadMode::half, 2, x, p, true);
    rows.push_back({"#7", "N=3", H * W * g3 * 9 * cs, m, (g3 * 9 + 2 * 3) * cs, p});
  }
  return rows;
}

}  // namespace swconv
