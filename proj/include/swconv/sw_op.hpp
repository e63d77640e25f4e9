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

// The shiftwise operator: small N x N fan-out convolutions whose outputs are
// integer-shifted and summed so that together they act like an M x N strip
// kernel.

#include <cstddef>
#include <array>
#include <optional>
#include <span>
#include <vector>

#include "swconv/conv_ref.hpp"
#include "swconv/shift_plan.hpp"
#include "swconv/sw_config.hpp"
#include "swconv/sw_weights.hpp"
#include "swconv/tensor.hpp"

namespace swconv {

enum class GridMode : std::uint8_t { cropped, extended };

enum class ForwardMode : std::uint8_t { train_shape, inference };

/// out[i,j] = sum_k maps[k][i + dy_k, j + dx_k] over the H x W output grid.
/// cropped: reads outside a map's defined region are zero.
/// extended: every read must land inside its map, otherwise PlanError.
/// Contributions are added in ascending k.
template <Real T>
Plane<T> shift_add(std::span<const Plane<T>> maps, std::span<const Displacement> disp, std::size_t h, std::size_t w,
                   GridMode mode) {
  if (maps.size() != disp.size()) throw PlanError("one displacement per map required");
  Plane<T> out(0, 0, h, w);
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  for (std::size_t k = 0; k < maps.size(); ++k) {
    const auto& m = maps[k];
    const auto [dy, dx] = disp[k];
    if (mode == GridMode::extended &&
        (dy < m.row0() || H - 1 + dy >= m.row_end() || dx < m.col0() || W - 1 + dx >= m.col_end()))
      throw PlanError("displacement (" + std::to_string(dy) + "," + std::to_string(dx) +
                      ") exceeds the extended margin of map " + std::to_string(k));
    for (std::ptrdiff_t i = 0; i < H; ++i) {
      const std::ptrdiff_t r = i + dy;
      if (r < m.row0() || r >= m.row_end()) continue;
      const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, m.col0() - dx);
      const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(W, m.col_end() - dx);
      for (std::ptrdiff_t j = j0; j < j1; ++j) out(i, j) += m(r, j + dx);
    }
  }
  return out;
}

/// Rows/cols of the output on which half padding loses nothing relative to
/// exact mode. `empty` is set when either range is empty.
struct Band {
  std::size_t row_begin = 0;
  std::size_t row_end = 0;  // exclusive
  std::size_t col_begin = 0;
  std::size_t col_end = 0;  // exclusive
  bool empty = true;

  bool contains(std::size_t i, std::size_t j) const {
    return !empty && i >= row_begin && i < row_end && j >= col_begin && j < col_end;
  }
};

/// Interior band: i >= delta_p and i <= H-1-((g-1)N - delta_p), and the same
/// for columns when the horizontal branch is active.
inline Band interior_band(const SwConfig& cfg, std::size_t h, std::size_t w) {
  cfg.validate();
  const auto delta = static_cast<std::ptrdiff_t>(cfg.pad_delta());
  const auto tail = static_cast<std::ptrdiff_t>((cfg.fanout() - 1) * cfg.N) - delta;
  auto range = [&](std::size_t extent, bool active) -> std::pair<std::ptrdiff_t, std::ptrdiff_t> {
    if (!active) return {0, static_cast<std::ptrdiff_t>(extent)};
    return {delta, static_cast<std::ptrdiff_t>(extent) - std::max<std::ptrdiff_t>(0, tail)};
  };
  const auto [r0, r1] = range(h, cfg.has_branch(BranchType::vertical));
  const auto [c0, c1] = range(w, cfg.has_branch(BranchType::horizontal));
  Band b;
  if (r0 >= r1 || c0 >= c1) return b;
  b.row_begin = static_cast<std::size_t>(r0);
  b.row_end = static_cast<std::size_t>(r1);
  b.col_begin = static_cast<std::size_t>(c0);
  b.col_end = static_cast<std::size_t>(c1);
  b.empty = false;
  return b;
}

/// Sum of the rep banks with masked filters zeroed (the inference weights).
template <Real T>
Tensor<T> merged_bank(const SwWeights<T>& w) {
  if (w.rep.empty()) throw ShapeError("no rep banks");
  Tensor<T> out(w.rep.front().shape());
  const std::size_t taps = out.extent(2) * out.extent(3);
  for (std::size_t r = 0; r < w.rep.size(); ++r) {
    const auto src = w.rep[r].data();
    auto dst = out.data();
    for (std::size_t f = 0; f < w.mask[r].size(); ++f) {
      if (!w.mask[r].kept(f)) continue;
      for (std::size_t t = 0; t < taps; ++t) dst[f * taps + t] += src[f * taps + t];
    }
  }
  return out;
}

/// Operator instance built from a strip kernel: config, weights and plan.
template <Real T>
struct StripLayout {
  SwConfig cfg;
  SwWeights<T> weights;
  ShiftPlan plan;
};

/// Lays an (C, M, N) vertical strip kernel out as g = ceil(M/N) stacked N x N
/// blocks: block k holds rows kN..kN+N-1, the last block zero-filled past M.
/// The returned operator runs only the vertical branch in exact mode and
/// reproduces the strip convolution.
template <Real T>
StripLayout<T> from_strip(const Tensor<T>& strip) {
  if (strip.rank() != 3) throw ShapeError("strip kernel must be (C, M, N)");
  SwConfig cfg;
  cfg.C = strip.extent(0);
  cfg.M = strip.extent(1);
  cfg.N = strip.extent(2);
  if (cfg.M % 2 == 0 || cfg.N % 2 == 0) throw ConfigError("from_strip needs odd M and N");
  cfg.pad_mode = PadMode::exact;
  cfg.order_policy = OrderPolicy::ordered;
  cfg.branches = branch_bit(BranchType::vertical);
  cfg.validate();

  const std::size_t g = cfg.fanout(), n = cfg.N, m = cfg.M;
  auto bank = zero_bank<T>(cfg);
  for (std::size_t c = 0; c < cfg.C; ++c)
    for (std::size_t k = 0; k < g; ++k)
      for (std::size_t u = 0; u < n && k * n + u < m; ++u)
        for (std::size_t v = 0; v < n; ++v)
          bank.at(c, k, u, v) = strip[(c * m + k * n + u) * n + v];

  StripLayout<T> out{cfg, {}, build_shift_plan(cfg)};
  out.weights.rep.push_back(std::move(bank));
  out.weights.mask.emplace_back(cfg.C, g, true);
  for (auto& nr : out.weights.norm) nr = AffineNorm<T>::identity(cfg.C);
  return out;
}

/// Optional instrumentation for sw_forward.
struct SwCounters {
  MacCounter conv;
  std::uint64_t moves = 0;  // shifted reads accumulated into a branch output
};

namespace detail {

template <Real T>
void check_forward_inputs(const Tensor<T>& x, const SwWeights<T>& w, const SwConfig& cfg, const ShiftPlan& plan) {
  cfg.validate();
  plan.check_matches(cfg);
  w.check_matches(cfg);
  if (x.rank() != 3 && x.rank() != 4) throw ShapeError("sw_forward input must be rank 3 or 4");
  const std::size_t c = x.extent(x.rank() == 4 ? 1 : 0);
  if (c != cfg.C) throw ShapeError("input has " + std::to_string(c) + " channels, config expects " + std::to_string(cfg.C));
}

/// Reduces per-edge branch outputs into one output channel: edges summed per
/// type in edge order, the type's norm applied, then types summed. A type
/// holding a single plane stands for E identical edges.
template <Real T>
void finish_channel(const std::array<std::vector<Plane<T>>, kBranchTypes>& edges, std::size_t c, const SwConfig& cfg,
                    const SwWeights<T>& wt, std::span<T> yc) {
  std::fill(yc.begin(), yc.end(), T{0});
  std::vector<T> acc(yc.size());
  for (std::size_t t = 0; t < kBranchTypes; ++t) {
    if (edges[t].empty()) continue;
    std::fill(acc.begin(), acc.end(), T{0});
    for (std::size_t e = 0; e < cfg.E; ++e) {
      const auto s = edges[t][edges[t].size() == 1 ? 0 : e].data();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s[i];
    }
    const auto& nr = wt.norm[t];
    for (std::size_t i = 0; i < acc.size(); ++i) yc[i] += nr.apply(acc[i], c);
  }
}

template <Real T>
void sw_forward_single(std::span<const T> xin, std::size_t h, std::size_t w, const SwWeights<T>& wt,
                       const SwConfig& cfg, const ShiftPlan& plan, ForwardMode mode, const Tensor<T>* merged,
                       std::span<T> yout, SwCounters* counters) {
  const std::size_t ghost = cfg.ghost_channels();
  const std::size_t cs = cfg.sw_channels();
  const std::size_t g = cfg.fanout();
  const std::size_t n = cfg.N;
  const std::size_t plane = h * w;
  const std::size_t taps = n * n;
  const std::size_t half = n / 2;
  const auto margins = working_margins(cfg, plan);
  const GridMode gm = cfg.pad_mode == PadMode::exact ? GridMode::extended : GridMode::cropped;
  MacCounter* mc = counters ? &counters->conv : nullptr;

  // Ghost channels pass through untouched.
  std::copy(xin.begin(), xin.begin() + static_cast<std::ptrdiff_t>(ghost * plane), yout.begin());

  const auto grid_rows = h + margins.top + margins.bottom;
  const auto grid_cols = w + margins.left + margins.right;
  const auto row0 = -static_cast<std::ptrdiff_t>(margins.top);
  const auto col0 = -static_cast<std::ptrdiff_t>(margins.left);

  std::vector<Plane<T>> maps(g);
  std::vector<Displacement> disp(g);
  for (std::size_t c = 0; c < cs; ++c) {
    const auto xc = xin.subspan((ghost + c) * plane, plane);
    for (std::size_t k = 0; k < g; ++k) {
      maps[k] = Plane<T>(row0, col0, grid_rows, grid_cols);
      if (mode == ForwardMode::inference) {
        correlate_plane<T>(xc, h, w, merged->data().subspan((c * g + k) * taps, taps), n, n, half, half, maps[k], mc);
        continue;
      }
      // Train shape: each rep branch runs separately, masked filters skipped.
      Plane<T> tmp(row0, col0, grid_rows, grid_cols);
      for (std::size_t r = 0; r < cfg.b; ++r) {
        if (!wt.mask[r].kept(c, k)) continue;
        correlate_plane<T>(xc, h, w, wt.rep[r].data().subspan((c * g + k) * taps, taps), n, n, half, half, tmp, mc);
        auto dst = maps[k].data();
        const auto src = tmp.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
    }

    std::array<std::vector<Plane<T>>, kBranchTypes> edges;
    for (std::size_t t = 0; t < kBranchTypes; ++t) {
      const auto bt = static_cast<BranchType>(t);
      if (!cfg.has_branch(bt)) continue;
      for (std::size_t e = 0; e < cfg.E; ++e) {
        if (bt == BranchType::center) {
          if (cfg.center_mode == CenterMode::independent) {
            Plane<T> cm(0, 0, h, w);
            correlate_plane<T>(xc, h, w, wt.center_bank->data().subspan(c * taps, taps), n, n, half, half, cm, mc);
            edges[t].push_back(std::move(cm));
          } else {
            const Displacement zero{};
            edges[t].push_back(shift_add<T>(std::span<const Plane<T>>(&maps[cfg.center_block()], 1),
                                            std::span<const Displacement>(&zero, 1), h, w, gm));
          }
          if (counters) counters->moves += plane;
        } else {
          for (std::size_t k = 0; k < g; ++k) disp[k] = plan.displacement(bt, e, c, k);
          edges[t].push_back(shift_add<T>(maps, disp, h, w, gm));
          if (counters) counters->moves += plane * g;
        }
      }
    }
    finish_channel<T>(edges, c, cfg, wt, yout.subspan((ghost + c) * plane, plane));
  }
}

}  // namespace detail

/// Shiftwise forward pass.
///  1. leading floor(G*C) ghost channels are copied through;
///  2. the remaining channels go through the fan-out conv on the pad mode's
///     working grid (rep branches summed after masking, or pre-merged in
///     inference mode);
///  3. per edge and branch type the maps are shift-added per the plan;
///  4. edges are summed within a branch type, then that type's norm applied;
///  5. the three branch types are summed.
template <Real T>
Tensor<T> sw_forward(const Tensor<T>& x, const SwWeights<T>& w, const SwConfig& cfg, const ShiftPlan& plan,
                     ForwardMode mode = ForwardMode::inference, SwCounters* counters = nullptr) {
  detail::check_forward_inputs(x, w, cfg, plan);
  std::optional<Tensor<T>> merged;
  if (mode == ForwardMode::inference) merged = merged_bank(w);
  const bool batched = x.rank() == 4;
  const std::size_t batch = batched ? x.extent(0) : 1;
  const std::size_t h = x.extent(batched ? 2 : 1);
  const std::size_t wd = x.extent(batched ? 3 : 2);
  Tensor<T> y(x.shape());
  const std::size_t step = cfg.C * h * wd;
  for (std::size_t bi = 0; bi < batch; ++bi)
    detail::sw_forward_single<T>(x.data().subspan(bi * step, step), h, wd, w, cfg, plan, mode,
                                 merged ? &*merged : nullptr, y.data().subspan(bi * step, step), counters);
  return y;
}

}  // namespace swconv
