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

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "swconv/shift_plan.hpp"
#include "swconv/stats.hpp"
#include "swconv/sw_config.hpp"

namespace swconv {

// Utilization of fan-out map k: the share of the H x W output grid that the
// map reaches through its H-branch displacement, unioned over edges.

struct CoverageQuery {
  std::size_t M = 51, N = 3;
  std::size_t H = 56, W = 56;
  std::size_t E = 1;
  OrderPolicy policy = OrderPolicy::ordered;
  std::size_t channels = 16;
  std::vector<std::uint64_t> seeds{kDefaultSeed};
};

struct CoverageStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Paints destination pixels (i, j) whose source (i+dy, j+dx) lies in-grid.
inline double painted_utilization(const std::vector<Displacement>& shifts, std::size_t h, std::size_t w) {
  std::vector<std::uint8_t> grid(h * w, 0);
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
  for (const auto& d : shifts)
    for (std::ptrdiff_t i = 0; i < H; ++i) {
      if (i + d.dy < 0 || i + d.dy >= H) continue;
      for (std::ptrdiff_t j = 0; j < W; ++j)
        if (j + d.dx >= 0 && j + d.dx < W) grid[static_cast<std::size_t>(i * W + j)] = 1;
    }
  std::size_t n = 0;
  for (auto v : grid) n += v;
  return static_cast<double>(n) / static_cast<double>(h * w);
}

/// Per-seed statistics over every (channel, k) pair.
inline std::vector<CoverageStats> coverage_per_seed(const CoverageQuery& q) {
  std::vector<CoverageStats> out;
  for (auto seed : q.seeds) {
    SwConfig cfg;
    cfg.M = q.M;
    cfg.N = q.N;
    cfg.C = q.channels;
    cfg.E = q.E;
    cfg.order_policy = q.policy;
    cfg.seed = seed;
    const auto plan = build_shift_plan(cfg);
    CoverageStats st{0.0, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    std::size_t count = 0;
    std::vector<Displacement> shifts(q.E);
    for (std::size_t c = 0; c < q.channels; ++c)
      for (std::size_t k = 0; k < cfg.fanout(); ++k) {
        for (std::size_t e = 0; e < q.E; ++e) shifts[e] = plan.displacement(BranchType::vertical, e, c, k);
        const double u = painted_utilization(shifts, q.H, q.W);
        st.mean += u;
        st.min = std::min(st.min, u);
        st.max = std::max(st.max, u);
        ++count;
      }
    st.mean /= static_cast<double>(count);
    out.push_back(st);
  }
  return out;
}

/// Seed-averaged mean/min/max.
inline CoverageStats coverage_ratio(const CoverageQuery& q) {
  const auto per = coverage_per_seed(q);
  CoverageStats s;
  for (const auto& p : per) {
    s.mean += p.mean;
    s.min += p.min;
    s.max += p.max;
  }
  const auto n = static_cast<double>(per.size());
  return {s.mean / n, s.min / n, s.max / n};
}

/// Closed form for an axis shift: max(0, H - |d|) / H.
inline double axis_utilization(std::ptrdiff_t d, std::size_t h) {
  const auto H = static_cast<std::ptrdiff_t>(h);
  return static_cast<double>(std::max<std::ptrdiff_t>(0, H - std::abs(d))) / static_cast<double>(h);
}

}  // namespace swconv
