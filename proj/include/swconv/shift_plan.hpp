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
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "swconv/rng.hpp"
#include "swconv/sw_config.hpp"

namespace swconv {

struct Displacement {
  std::ptrdiff_t dy = 0;
  std::ptrdiff_t dx = 0;
  bool operator==(const Displacement&) const = default;
};

/// Extra rows/cols around the H x W output on which fan-out maps are evaluated.
struct GridMargins {
  std::size_t top = 0;
  std::size_t bottom = 0;
  std::size_t left = 0;
  std::size_t right = 0;
  bool operator==(const GridMargins&) const = default;
};

/// Per (edge, channel, fan-out block) shift-index assignment.
///
/// Base displacements are d_i = i*N - delta_p. Block k of channel c on edge e
/// moves by (d_{sv(e,c,k)}, 0) in the vertical branch and by
/// (0, d_{g-1-sh(e,c,k)}) in the horizontal branch (reverse order). The
/// centre branch always uses block g//2 with no displacement.
class ShiftPlan {
 public:
  ShiftPlan() = default;
  ShiftPlan(std::size_t edges, std::size_t channels, std::size_t fanout, std::size_t n, std::size_t delta)
      : edges_(edges), channels_(channels), fanout_(fanout), n_(n), delta_(delta),
        vertical_(edges * channels * fanout), horizontal_(edges * channels * fanout) {}

  std::size_t edges() const { return edges_; }
  std::size_t channels() const { return channels_; }
  std::size_t fanout() const { return fanout_; }
  std::size_t short_side() const { return n_; }
  std::size_t pad_delta() const { return delta_; }
  std::size_t center_block() const { return fanout_ / 2; }

  std::ptrdiff_t base(std::size_t i) const {
    return static_cast<std::ptrdiff_t>(i * n_) - static_cast<std::ptrdiff_t>(delta_);
  }

  std::span<std::uint32_t> vertical(std::size_t e, std::size_t c) {
    return std::span<std::uint32_t>(vertical_).subspan(slot(e, c), fanout_);
  }
  std::span<const std::uint32_t> vertical(std::size_t e, std::size_t c) const {
    return std::span<const std::uint32_t>(vertical_).subspan(slot(e, c), fanout_);
  }
  std::span<std::uint32_t> horizontal(std::size_t e, std::size_t c) {
    return std::span<std::uint32_t>(horizontal_).subspan(slot(e, c), fanout_);
  }
  std::span<const std::uint32_t> horizontal(std::size_t e, std::size_t c) const {
    return std::span<const std::uint32_t>(horizontal_).subspan(slot(e, c), fanout_);
  }

  Displacement displacement(BranchType t, std::size_t e, std::size_t c, std::size_t k) const {
    switch (t) {
      case BranchType::vertical: return {base(vertical(e, c)[k]), 0};
      case BranchType::horizontal: return {0, base(fanout_ - 1 - horizontal(e, c)[k])};
      case BranchType::center: return {0, 0};
    }
    return {};
  }

  /// Largest |d_i| over the base table; the symmetric lossless margin.
  std::size_t max_shift() const {
    const auto lo = static_cast<std::size_t>(delta_);
    const auto hi = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, base(fanout_ - 1)));
    return std::max(lo, hi);
  }

  /// Throws PlanError unless the plan was built for this configuration.
  void check_matches(const SwConfig& cfg) const {
    if (edges_ != cfg.E || channels_ != cfg.sw_channels() || fanout_ != cfg.fanout() || n_ != cfg.N ||
        delta_ != cfg.pad_delta())
      throw PlanError("shift plan does not match operator config");
  }

  bool operator==(const ShiftPlan&) const = default;

 private:
  std::size_t slot(std::size_t e, std::size_t c) const {
    if (e >= edges_ || c >= channels_) throw IndexError("shift plan slot out of range");
    return (e * channels_ + c) * fanout_;
  }

  std::size_t edges_ = 0;
  std::size_t channels_ = 0;
  std::size_t fanout_ = 0;
  std::size_t n_ = 0;
  std::size_t delta_ = 0;
  std::vector<std::uint32_t> vertical_;
  std::vector<std::uint32_t> horizontal_;
};

/// Deterministic permutation for (seed, layer, edge, channel).
inline std::vector<std::size_t> plan_permutation(std::uint64_t seed, std::uint64_t layer, std::uint64_t edge,
                                                 std::uint64_t channel, std::size_t n) {
  return CounterRng({seed, layer, edge, channel, 0x5348494654ull}).permutation(n);
}

inline ShiftPlan build_shift_plan(const SwConfig& cfg) {
  cfg.validate();
  const std::size_t g = cfg.fanout();
  const std::size_t channels = cfg.sw_channels();
  ShiftPlan plan(cfg.E, channels, g, cfg.N, cfg.pad_delta());
  for (std::size_t e = 0; e < cfg.E; ++e) {
    for (std::size_t c = 0; c < channels; ++c) {
      auto v = plan.vertical(e, c);
      auto h = plan.horizontal(e, c);
      switch (cfg.order_policy) {
        case OrderPolicy::ordered:
          for (std::size_t k = 0; k < g; ++k) v[k] = h[k] = static_cast<std::uint32_t>(k);
          break;
        case OrderPolicy::disordered: {
          // One fixed shuffle per channel on the vertical branch, shared by all
          // edges; the horizontal branch keeps the reversed natural order.
          const auto p = plan_permutation(cfg.seed, cfg.layer_id, ~std::uint64_t{0}, c, g);
          for (std::size_t k = 0; k < g; ++k) {
            v[k] = static_cast<std::uint32_t>(p[k]);
            h[k] = static_cast<std::uint32_t>(k);
          }
          break;
        }
        case OrderPolicy::per_edge_shuffled: {
          const auto p = plan_permutation(cfg.seed, cfg.layer_id, e, c, g);
          for (std::size_t k = 0; k < g; ++k) v[k] = h[k] = static_cast<std::uint32_t>(p[k]);
          break;
        }
      }
    }
  }
  return plan;
}

/// Working-grid margins for the fan-out maps under the configured pad mode.
inline GridMargins working_margins(const SwConfig& cfg, const ShiftPlan& plan) {
  switch (cfg.pad_mode) {
    case PadMode::half: return {};
    case PadMode::exact: {
      const std::size_t m = plan.max_shift();
      GridMargins g;
      if (cfg.has_branch(BranchType::vertical)) g.top = g.bottom = m;
      if (cfg.has_branch(BranchType::horizontal)) g.left = g.right = m;
      return g;
    }
    case PadMode::full: {
      // Grid grows by (N-1) - ceil(N/2) in each axis, leading side first.
      const auto n = static_cast<std::ptrdiff_t>(cfg.N);
      const auto grow = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (n - 1) - (n + 1) / 2));
      const std::size_t lead = grow / 2;
      const std::size_t trail = grow - lead;
      return {lead, trail, lead, trail};
    }
  }
  return {};
}

}  // namespace swconv
