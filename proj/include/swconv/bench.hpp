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

// CPU implementation variants of the shiftwise forward pass with data
// movement and scratch-memory instrumentation, plus a timing harness.
//
// Every variant evaluates fan-out pixels with correlate_at and reduces edges
// with finish_channel in the same order, so deterministic runs agree to the
// bit. The move counter records destination-accumulation events per fan-out
// output pixel.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "swconv/conv_ref.hpp"
#include "swconv/rng.hpp"
#include "swconv/stats.hpp"
#include "swconv/sw_op.hpp"
#include "swconv/text.hpp"

namespace swconv {

enum class Variant : std::uint8_t { naive, fused, tiled, parallel };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::naive: return "naive";
    case Variant::fused: return "fused";
    case Variant::tiled: return "tiled";
    case Variant::parallel: return "parallel";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "naive") return Variant::naive;
  if (s == "fused") return Variant::fused;
  if (s == "tiled") return Variant::tiled;
  if (s == "parallel") return Variant::parallel;
  throw ConfigError("unknown variant '" + s + "' (naive|fused|tiled|parallel)");
}

inline constexpr std::array<Variant, 4> kAllVariants{Variant::naive, Variant::fused, Variant::tiled,
                                                     Variant::parallel};

/// Tracks live and peak bytes of scratch buffers. Thread safe.
class ScratchMeter {
 public:
  void acquire(std::size_t bytes) {
    const std::size_t now = current_.fetch_add(bytes) + bytes;
    std::size_t p = peak_.load();
    while (now > p && !peak_.compare_exchange_weak(p, now)) {
    }
  }
  void release(std::size_t bytes) { current_.fetch_sub(bytes); }
  std::size_t peak() const { return peak_.load(); }
  std::size_t current() const { return current_.load(); }

 private:
  std::atomic<std::size_t> current_{0};
  std::atomic<std::size_t> peak_{0};
};

/// RAII registration of a scratch allocation with a meter.
class MeterLease {
 public:
  MeterLease() = default;
  MeterLease(ScratchMeter* m, std::size_t bytes) : meter_(m), bytes_(bytes) {
    if (meter_) meter_->acquire(bytes_);
  }
  MeterLease(const MeterLease&) = delete;
  MeterLease& operator=(const MeterLease&) = delete;
  MeterLease(MeterLease&& o) noexcept : meter_(o.meter_), bytes_(o.bytes_) { o.meter_ = nullptr; }
  MeterLease& operator=(MeterLease&& o) noexcept {
    if (this != &o) {
      reset();
      meter_ = o.meter_;
      bytes_ = o.bytes_;
      o.meter_ = nullptr;
    }
    return *this;
  }
  ~MeterLease() { reset(); }

 private:
  void reset() {
    if (meter_) meter_->release(bytes_);
    meter_ = nullptr;
  }
  ScratchMeter* meter_ = nullptr;
  std::size_t bytes_ = 0;
};

struct BenchOptions {
  std::size_t reps = 5;
  std::size_t warmup = 3;
  std::size_t threads = 0;    // 0: SW_NUM_THREADS, else hardware concurrency
  std::size_t tile_rows = 0;  // 0: autoprobe (tiled variant)
  bool relaxed = false;       // parallel only: k-chunk items merged in arrival order
  bool skip_masked = true;    // fused family skips filters masked in every branch
};

/// Thread count: explicit value, else SW_NUM_THREADS, else hardware concurrency.
inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SW_NUM_THREADS"); env && *env) {
    const auto v = parse_int<std::size_t>(env, "SW_NUM_THREADS");
    if (v > 0) return v;
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Instrumentation of one kernel run.
struct KernelStats {
  std::uint64_t macs = 0;
  std::uint64_t moves_total = 0;
  std::uint32_t moves_max = 0;  // per fan-out output pixel
  std::uint64_t pixels = 0;     // fan-out pixels evaluated
  std::size_t peak_bytes = 0;
  std::size_t tile_rows = 0;
  std::size_t threads = 1;

  double moves_mean() const { return pixels ? static_cast<double>(moves_total) / static_cast<double>(pixels) : 0.0; }
};

/// Input, weights and plan for one benchmark instance.
template <Real T>
struct BenchProblem {
  SwConfig cfg;
  ShiftPlan plan;
  SwWeights<T> weights;
  Tensor<T> x;  // (C, H, W)
};

/// Inputs uniform in [-1, 1), weights uniform in [-0.1, 0.1), identity norms.
template <Real T>
BenchProblem<T> make_bench_problem(const SwConfig& cfg, std::size_t h, std::size_t w, std::uint64_t seed) {
  cfg.validate();
  if (h == 0 || w == 0) throw ShapeError("bench sizes must be positive");
  BenchProblem<T> p{cfg, build_shift_plan(cfg), random_sw_weights<T>(cfg, derive_key({seed, 0x42454e43ull}), 0.1),
                    Tensor<T>(Shape{static_cast<std::int64_t>(cfg.C), static_cast<std::int64_t>(h),
                                    static_cast<std::int64_t>(w)})};
  CounterRng rng({seed, 0x494e5055ull});
  for (auto& v : p.x.data()) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  return p;
}

namespace detail {

struct Dest {
  std::size_t type = 0;
  std::size_t slot = 0;
  std::ptrdiff_t dy = 0;
  std::ptrdiff_t dx = 0;
};

template <Real T>
struct KernelCtx {
  std::span<const T> x;
  std::size_t h = 0, w = 0;
  const SwConfig* cfg = nullptr;
  const ShiftPlan* plan = nullptr;
  const SwWeights<T>* wt = nullptr;
  const Tensor<T>* merged = nullptr;
  std::vector<char> live;  // per (c, k)
  std::size_t ghost = 0, cs = 0, g = 0, n = 0, taps = 0, half = 0;
  std::ptrdiff_t row0 = 0, col0 = 0;
  std::size_t rows = 0, cols = 0;

  std::span<const T> xc(std::size_t c) const { return x.subspan((ghost + c) * h * w, h * w); }
  std::span<const T> kernel(std::size_t c, std::size_t k) const {
    return merged->data().subspan((c * g + k) * taps, taps);
  }
};

template <Real T>
KernelCtx<T> make_ctx(const BenchProblem<T>& p, const Tensor<T>& merged, bool skip_masked) {
  const auto& cfg = p.cfg;
  detail::check_forward_inputs(p.x, p.weights, cfg, p.plan);
  if (p.x.rank() != 3) throw ShapeError("bench input must be (C,H,W)");
  KernelCtx<T> k;
  k.x = p.x.data();
  k.h = p.x.extent(1);
  k.w = p.x.extent(2);
  k.cfg = &cfg;
  k.plan = &p.plan;
  k.wt = &p.weights;
  k.merged = &merged;
  k.ghost = cfg.ghost_channels();
  k.cs = cfg.sw_channels();
  k.g = cfg.fanout();
  k.n = cfg.N;
  k.taps = cfg.N * cfg.N;
  k.half = cfg.N / 2;
  const auto m = working_margins(cfg, p.plan);
  k.row0 = -static_cast<std::ptrdiff_t>(m.top);
  k.col0 = -static_cast<std::ptrdiff_t>(m.left);
  k.rows = k.h + m.top + m.bottom;
  k.cols = k.w + m.left + m.right;
  k.live.assign(k.cs * k.g, 1);
  if (skip_masked) {
    for (std::size_t f = 0; f < k.live.size(); ++f) {
      bool any = false;
      for (const auto& mk : p.weights.mask) any = any || mk.kept(f);
      k.live[f] = any ? 1 : 0;
    }
  }
  return k;
}

/// Destinations of map (c, k) in the accumulator set.
template <Real T>
std::vector<Dest> destinations(const KernelCtx<T>& ctx, std::size_t c, std::size_t k) {
  const auto& cfg = *ctx.cfg;
  std::vector<Dest> d;
  for (std::size_t t = 0; t < 2; ++t) {
    const auto bt = static_cast<BranchType>(t);
    if (!cfg.has_branch(bt)) continue;
    for (std::size_t e = 0; e < cfg.E; ++e) {
      const auto disp = ctx.plan->displacement(bt, e, c, k);
      d.push_back({t, e, disp.dy, disp.dx});
    }
  }
  if (cfg.has_branch(BranchType::center) && cfg.center_mode == CenterMode::shared && k == cfg.center_block())
    d.push_back({2, 0, 0, 0});
  return d;
}

/// Per-thread accumulators: E planes for H and W, one centre plane, plus a
/// fan-out tile of tile_rows x grid cols.
template <Real T>
struct Accumulators {
  std::array<std::vector<Plane<T>>, kBranchTypes> planes;
  std::vector<T> tile;
  std::vector<std::uint32_t> tally;  // per grid pixel, only when instrumenting
  MeterLease lease;

  Accumulators(const KernelCtx<T>& ctx, std::size_t tile_rows, ScratchMeter* meter, bool instrument) {
    const auto& cfg = *ctx.cfg;
    std::size_t count = 0;
    for (std::size_t t = 0; t < kBranchTypes; ++t) {
      if (!cfg.has_branch(static_cast<BranchType>(t))) continue;
      const std::size_t np = t == 2 ? 1 : cfg.E;
      for (std::size_t e = 0; e < np; ++e) planes[t].emplace_back(0, 0, ctx.h, ctx.w);
      count += np;
    }
    tile.assign(tile_rows * ctx.cols, T{0});
    if (instrument) tally.assign(ctx.rows * ctx.cols, 0);
    // Reduction scratch of finish_channel (one plane) is charged here too.
    lease = MeterLease(meter, (count + 1) * ctx.h * ctx.w * sizeof(T) + tile.size() * sizeof(T));
  }

  void clear() {
    for (auto& v : planes)
      for (auto& p : v) std::fill(p.data().begin(), p.data().end(), T{0});
  }
};

inline void note_moves(KernelStats& s, std::span<std::uint32_t> tally) {
  for (auto& v : tally) {
    s.moves_total += v;
    s.moves_max = std::max(s.moves_max, v);
    v = 0;
  }
}

/// Fused kernel for channel c over blocks [kb, ke): each fan-out tile is
/// computed and immediately scattered into the shifted destinations.
template <Real T>
void fused_channel(const KernelCtx<T>& ctx, std::size_t c, std::size_t kb, std::size_t ke, std::size_t tile_rows,
                   Accumulators<T>& acc, KernelStats& st) {
  const auto H = static_cast<std::ptrdiff_t>(ctx.h);
  const auto W = static_cast<std::ptrdiff_t>(ctx.w);
  const auto row_end = ctx.row0 + static_cast<std::ptrdiff_t>(ctx.rows);
  const auto col_end = ctx.col0 + static_cast<std::ptrdiff_t>(ctx.cols);
  const auto xc = ctx.xc(c);
  const bool instrument = !acc.tally.empty();
  for (std::size_t k = kb; k < ke; ++k) {
    if (!ctx.live[c * ctx.g + k]) continue;
    const auto dests = destinations(ctx, c, k);
    if (dests.empty()) continue;
    const auto kern = ctx.kernel(c, k);
    for (std::ptrdiff_t r0 = ctx.row0; r0 < row_end; r0 += static_cast<std::ptrdiff_t>(tile_rows)) {
      const auto nr = static_cast<std::size_t>(std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(tile_rows), row_end - r0));
      for (std::size_t rr = 0; rr < nr; ++rr) {
        correlate_row(xc, ctx.h, ctx.w, kern, ctx.n, ctx.n, ctx.half, ctx.half, r0 + static_cast<std::ptrdiff_t>(rr),
                      ctx.col0, ctx.cols, acc.tile.data() + rr * ctx.cols);
      }
      st.macs += nr * ctx.cols * ctx.taps;
      st.pixels += nr * ctx.cols;
      for (std::size_t rr = 0; rr < nr; ++rr) {
        const std::ptrdiff_t r = r0 + static_cast<std::ptrdiff_t>(rr);
        const T* row = acc.tile.data() + rr * ctx.cols;
        for (const auto& d : dests) {
          const std::ptrdiff_t i = r - d.dy;
          if (i < 0 || i >= H) continue;
          const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, ctx.col0 - d.dx);
          const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(W, col_end - d.dx);
          auto& plane = acc.planes[d.type][d.slot];
          for (std::ptrdiff_t j = j0; j < j1; ++j) plane(i, j) += row[j + d.dx - ctx.col0];
          if (instrument) {
            auto* t = acc.tally.data() + static_cast<std::size_t>(r - ctx.row0) * ctx.cols;
            for (std::ptrdiff_t j = j0; j < j1; ++j) ++t[j + d.dx - ctx.col0];
          }
        }
      }
    }
    if (instrument) note_moves(st, acc.tally);
  }
}

/// Independent centre: one N x N conv accumulated once into the centre plane.
template <Real T>
void independent_center(const KernelCtx<T>& ctx, std::size_t c, Accumulators<T>& acc, KernelStats& st) {
  const auto& cfg = *ctx.cfg;
  if (!cfg.has_branch(BranchType::center) || cfg.center_mode != CenterMode::independent) return;
  const auto kern = ctx.wt->center_bank->data().subspan(c * ctx.taps, ctx.taps);
  const auto xc = ctx.xc(c);
  auto& plane = acc.planes[2][0];
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(ctx.h); ++i)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(ctx.w); ++j)
      plane(i, j) += correlate_at(xc, ctx.h, ctx.w, kern, ctx.n, ctx.n, ctx.half, ctx.half, i, j);
  st.macs += ctx.h * ctx.w * ctx.taps;
  st.pixels += ctx.h * ctx.w;
  if (!acc.tally.empty()) {
    st.moves_total += ctx.h * ctx.w;
    st.moves_max = std::max<std::uint32_t>(st.moves_max, 1);
  }
}

template <Real T>
void copy_ghost(const KernelCtx<T>& ctx, std::span<T> y) {
  const auto n = ctx.ghost * ctx.h * ctx.w;
  std::copy(ctx.x.begin(), ctx.x.begin() + static_cast<std::ptrdiff_t>(n), y.begin());
}

template <Real T>
void run_naive(const KernelCtx<T>& ctx, std::span<T> y, ScratchMeter& meter, KernelStats& st, bool instrument) {
  const auto& cfg = *ctx.cfg;
  const GridMode gm = cfg.pad_mode == PadMode::exact ? GridMode::extended : GridMode::cropped;
  const std::size_t plane = ctx.h * ctx.w;
  copy_ghost(ctx, y);

  // Stage 1: the whole fan-out tensor.
  MeterLease maps_lease(&meter, ctx.cs * ctx.g * ctx.rows * ctx.cols * sizeof(T));
  std::vector<Plane<T>> maps(ctx.cs * ctx.g);
  MacCounter mc;
  for (std::size_t c = 0; c < ctx.cs; ++c)
    for (std::size_t k = 0; k < ctx.g; ++k) {
      auto& m = maps[c * ctx.g + k];
      m = Plane<T>(ctx.row0, ctx.col0, ctx.rows, ctx.cols);
      correlate_plane<T>(ctx.xc(c), ctx.h, ctx.w, ctx.kernel(c, k), ctx.n, ctx.n, ctx.half, ctx.half, m, &mc);
    }
  st.pixels += ctx.cs * ctx.g * ctx.rows * ctx.cols;

  // Stage 2: per channel, one shift-add output per (branch type, edge).
  std::size_t edge_planes = 0;
  for (std::size_t t = 0; t < kBranchTypes; ++t)
    if (cfg.has_branch(static_cast<BranchType>(t))) edge_planes += cfg.E;
  MeterLease edge_lease(&meter, (edge_planes + 1) * plane * sizeof(T));
  std::vector<Displacement> disp(ctx.g);
  std::vector<std::uint32_t> tally;
  if (instrument) tally.assign(ctx.rows * ctx.cols, 0);
  for (std::size_t c = 0; c < ctx.cs; ++c) {
    const std::span<const Plane<T>> cmaps(maps.data() + c * ctx.g, ctx.g);
    std::array<std::vector<Plane<T>>, kBranchTypes> edges;
    for (std::size_t t = 0; t < kBranchTypes; ++t) {
      const auto bt = static_cast<BranchType>(t);
      if (!cfg.has_branch(bt)) continue;
      for (std::size_t e = 0; e < cfg.E; ++e) {
        if (bt == BranchType::center) {
          if (cfg.center_mode == CenterMode::independent) {
            Plane<T> cm(0, 0, ctx.h, ctx.w);
            correlate_plane<T>(ctx.xc(c), ctx.h, ctx.w, ctx.wt->center_bank->data().subspan(c * ctx.taps, ctx.taps),
                               ctx.n, ctx.n, ctx.half, ctx.half, cm, &mc);
            edges[t].push_back(std::move(cm));
          } else {
            const Displacement zero{};
            edges[t].push_back(shift_add<T>(cmaps.subspan(cfg.center_block(), 1),
                                            std::span<const Displacement>(&zero, 1), ctx.h, ctx.w, gm));
          }
        } else {
          for (std::size_t k = 0; k < ctx.g; ++k) disp[k] = ctx.plan->displacement(bt, e, c, k);
          edges[t].push_back(shift_add<T>(cmaps, disp, ctx.h, ctx.w, gm));
        }
      }
    }
    finish_channel<T>(edges, c, cfg, *ctx.wt, y.subspan((ctx.ghost + c) * plane, plane));

    if (instrument) {
      // One store per fan-out pixel plus one accumulation per shifted read.
      const auto H = static_cast<std::ptrdiff_t>(ctx.h);
      const auto W = static_cast<std::ptrdiff_t>(ctx.w);
      const auto col_end = ctx.col0 + static_cast<std::ptrdiff_t>(ctx.cols);
      for (std::size_t k = 0; k < ctx.g; ++k) {
        std::fill(tally.begin(), tally.end(), 1u);
        for (const auto& d : destinations(ctx, c, k)) {
          for (std::ptrdiff_t i = 0; i < H; ++i) {
            const std::ptrdiff_t r = i + d.dy;
            if (r < ctx.row0 || r >= ctx.row0 + static_cast<std::ptrdiff_t>(ctx.rows)) continue;
            const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, ctx.col0 - d.dx);
            const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(W, col_end - d.dx);
            auto* t = tally.data() + static_cast<std::size_t>(r - ctx.row0) * ctx.cols;
            for (std::ptrdiff_t j = j0; j < j1; ++j) ++t[j + d.dx - ctx.col0];
          }
        }
        note_moves(st, tally);
      }
    }
  }
  st.macs += mc.macs;
}

template <Real T>
void run_fused(const KernelCtx<T>& ctx, std::size_t tile_rows, std::span<T> y, ScratchMeter& meter, KernelStats& st,
               bool instrument) {
  const std::size_t plane = ctx.h * ctx.w;
  copy_ghost(ctx, y);
  Accumulators<T> acc(ctx, tile_rows, &meter, instrument);
  for (std::size_t c = 0; c < ctx.cs; ++c) {
    acc.clear();
    independent_center(ctx, c, acc, st);
    fused_channel(ctx, c, 0, ctx.g, tile_rows, acc, st);
    finish_channel<T>(acc.planes, c, *ctx.cfg, *ctx.wt, y.subspan((ctx.ghost + c) * plane, plane));
  }
}

inline void merge_stats(KernelStats& into, const KernelStats& s) {
  into.macs += s.macs;
  into.moves_total += s.moves_total;
  into.moves_max = std::max(into.moves_max, s.moves_max);
  into.pixels += s.pixels;
}

/// Channels are independent work items; each worker owns its accumulators
/// and writes a disjoint output slice, so the result equals the fused one.
template <Real T>
void run_parallel(const KernelCtx<T>& ctx, std::size_t tile_rows, std::size_t threads, std::span<T> y,
                  ScratchMeter& meter, KernelStats& st, bool instrument) {
  const std::size_t plane = ctx.h * ctx.w;
  copy_ghost(ctx, y);
  threads = std::max<std::size_t>(1, std::min(threads, ctx.cs));
  std::atomic<std::size_t> next{0};
  std::vector<KernelStats> local(threads);
  std::vector<std::exception_ptr> errors(threads);
  auto worker = [&](std::size_t id) {
    try {
      Accumulators<T> acc(ctx, tile_rows, &meter, instrument);
      for (std::size_t c = next++; c < ctx.cs; c = next++) {
        acc.clear();
        independent_center(ctx, c, acc, local[id]);
        fused_channel(ctx, c, 0, ctx.g, tile_rows, acc, local[id]);
        finish_channel<T>(acc.planes, c, *ctx.cfg, *ctx.wt, y.subspan((ctx.ghost + c) * plane, plane));
      }
    } catch (...) {
      errors[id] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker, i);
  worker(0);
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (const auto& s : local) merge_stats(st, s);
}

/// Relaxed: (channel, k-chunk) items accumulate privately and are merged into
/// the channel's accumulators in arrival order. Not bitwise reproducible.
template <Real T>
void run_parallel_relaxed(const KernelCtx<T>& ctx, std::size_t tile_rows, std::size_t threads, std::span<T> y,
                          ScratchMeter& meter, KernelStats& st, bool instrument) {
  const std::size_t plane = ctx.h * ctx.w;
  copy_ghost(ctx, y);
  threads = std::max<std::size_t>(1, threads);
  const std::size_t chunks = std::min(ctx.g, std::max<std::size_t>(2, threads));
  const std::size_t items = ctx.cs * chunks;
  std::vector<std::unique_ptr<Accumulators<T>>> shared;
  for (std::size_t c = 0; c < ctx.cs; ++c) shared.push_back(std::make_unique<Accumulators<T>>(ctx, 0, &meter, false));
  std::vector<std::mutex> locks(ctx.cs);
  std::vector<std::size_t> arrived(ctx.cs, 0);
  std::atomic<std::size_t> next{0};
  std::vector<KernelStats> local(threads);
  std::vector<std::exception_ptr> errors(threads);
  auto worker = [&](std::size_t id) {
    try {
      Accumulators<T> acc(ctx, tile_rows, &meter, instrument);
      for (std::size_t it = next++; it < items; it = next++) {
        const std::size_t c = it / chunks, q = it % chunks;
        const std::size_t kb = q * ctx.g / chunks, ke = (q + 1) * ctx.g / chunks;
        acc.clear();
        if (q == 0) independent_center(ctx, c, acc, local[id]);
        fused_channel(ctx, c, kb, ke, tile_rows, acc, local[id]);
        std::lock_guard<std::mutex> guard(locks[c]);
        auto& dst = *shared[c];
        for (std::size_t t = 0; t < kBranchTypes; ++t)
          for (std::size_t e = 0; e < dst.planes[t].size(); ++e) {
            auto d = dst.planes[t][e].data();
            const auto s = acc.planes[t][e].data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
          }
        if (++arrived[c] == chunks) {
          finish_channel<T>(dst.planes, c, *ctx.cfg, *ctx.wt, y.subspan((ctx.ghost + c) * plane, plane));
          shared[c].reset();
        }
      }
    } catch (...) {
      errors[id] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker, i);
  worker(0);
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (const auto& s : local) merge_stats(st, s);
}

}  // namespace detail

/// Default tile height: largest power of two whose tile fits 32 KiB.
inline std::size_t default_tile_rows(std::size_t grid_cols, std::size_t elem_bytes) {
  std::size_t rows = 1;
  while (rows * 2 * grid_cols * elem_bytes <= 32768 && rows < 256) rows *= 2;
  return rows;
}

/// Runs one variant once. `stats` receives counters, peak scratch bytes and
/// the tile/thread settings used; counting moves costs time, so timing runs
/// pass instrument = false.
template <Real T>
Tensor<T> run_kernel(Variant v, const BenchProblem<T>& p, const BenchOptions& o, KernelStats* stats = nullptr,
                     bool instrument = false) {
  const Tensor<T> merged = merged_bank(p.weights);
  const bool skip = o.skip_masked && v != Variant::naive;
  const auto ctx = detail::make_ctx(p, merged, skip);
  Tensor<T> y(p.x.shape());
  ScratchMeter meter;
  KernelStats st;
  st.tile_rows = 1;
  switch (v) {
    case Variant::naive:
      st.tile_rows = ctx.rows;
      detail::run_naive(ctx, y.data(), meter, st, instrument);
      break;
    case Variant::fused: detail::run_fused(ctx, 1, y.data(), meter, st, instrument); break;
    case Variant::tiled:
      st.tile_rows = o.tile_rows ? o.tile_rows : default_tile_rows(ctx.cols, sizeof(T));
      detail::run_fused(ctx, st.tile_rows, y.data(), meter, st, instrument);
      break;
    case Variant::parallel:
      st.threads = resolve_threads(o.threads);
      if (o.relaxed)
        detail::run_parallel_relaxed(ctx, 1, st.threads, y.data(), meter, st, instrument);
      else
        detail::run_parallel(ctx, 1, st.threads, y.data(), meter, st, instrument);
      break;
  }
  st.peak_bytes = meter.peak();
  if (stats) *stats = st;
  return y;
}

/// Wall-clock samples in nanoseconds on a monotonic clock; warmups discarded.
inline std::vector<double> time_samples(const std::function<void()>& fn, std::size_t warmup, std::size_t reps) {
  for (std::size_t i = 0; i < warmup; ++i) fn();
  std::vector<double> out;
  out.reserve(reps);
  for (std::size_t i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    out.push_back(static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()));
  }
  return out;
}

/// Picks the fastest tile height among powers of two up to the grid height.
template <Real T>
std::size_t autoprobe_tile_rows(const BenchProblem<T>& p) {
  const auto m = working_margins(p.cfg, p.plan);
  const std::size_t rows = p.x.extent(1) + m.top + m.bottom;
  std::size_t best = 1;
  double best_ns = -1;
  BenchOptions o;
  for (std::size_t tr = 2; tr <= std::min<std::size_t>(rows, 64); tr *= 2) {
    o.tile_rows = tr;
    const auto s = time_samples([&] { (void)run_kernel(Variant::tiled, p, o); }, 0, 1);
    if (best_ns < 0 || s[0] < best_ns) {
      best_ns = s[0];
      best = tr;
    }
  }
  return best;
}

/// FNV-1a over the little-endian bit patterns of the output.
template <Real T>
std::string checksum(const Tensor<T>& t) {
  const auto bytes = encode_container(t);
  return hex64(fnv1a(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size())));
}

/// Digest of the operator config and input sizes.
inline std::string config_digest(const SwConfig& cfg, std::size_t h, std::size_t w) {
  return hex64(fnv1a(serialize(cfg) + "H=" + std::to_string(h) + "\nW=" + std::to_string(w) + "\n"));
}

struct BenchReport {
  std::string variant;
  std::string config_digest;
  std::vector<double> samples_ns;
  double median_ns = 0;
  double mad_ns = 0;
  std::uint32_t moves_per_output_pixel = 0;  // max over fan-out pixels
  double mean_moves_per_pixel = 0;
  std::size_t peak_intermediate_bytes = 0;
  std::uint64_t macs = 0;
  std::size_t threads = 1;
  std::size_t tile_rows = 1;
  std::string checksum;
};

template <Real T>
BenchReport run_variant(Variant v, const BenchProblem<T>& p, BenchOptions o) {
  if (o.reps < 5) throw ConfigError("reps must be at least 5");
  if (v == Variant::tiled && o.tile_rows == 0) o.tile_rows = autoprobe_tile_rows(p);
  KernelStats st;
  const auto y = run_kernel(v, p, o, &st, true);
  BenchReport r;
  r.variant = std::string(to_string(v)) + (v == Variant::parallel && o.relaxed ? "_relaxed" : "");
  r.config_digest = config_digest(p.cfg, p.x.extent(1), p.x.extent(2));
  r.samples_ns = time_samples([&] { (void)run_kernel(v, p, o); }, o.warmup, o.reps);
  r.median_ns = median(r.samples_ns);
  r.mad_ns = mad(r.samples_ns);
  r.moves_per_output_pixel = st.moves_max;
  r.mean_moves_per_pixel = st.moves_mean();
  r.peak_intermediate_bytes = st.peak_bytes;
  r.macs = st.macs;
  r.threads = st.threads;
  r.tile_rows = st.tile_rows;
  r.checksum = checksum(y);
  return r;
}

/// Median over reps of t(b)/t(a), with a and b run back to back in each rep
/// so that slow drift on a shared machine cancels.
template <Real T>
double paired_time_ratio(Variant a, Variant b, const BenchProblem<T>& p, const BenchOptions& o) {
  if (o.reps < 5) throw ConfigError("reps must be at least 5");
  for (std::size_t i = 0; i < o.warmup; ++i) {
    (void)run_kernel(a, p, o);
    (void)run_kernel(b, p, o);
  }
  std::vector<double> ratios;
  for (std::size_t i = 0; i < o.reps; ++i) {
    const double ta = time_samples([&] { (void)run_kernel(a, p, o); }, 0, 1).front();
    const double tb = time_samples([&] { (void)run_kernel(b, p, o); }, 0, 1).front();
    ratios.push_back(tb / ta);
  }
  return median(ratios);
}

template <Real T>
BenchReport run_variant(const std::string& variant, const SwConfig& cfg, std::size_t h, std::size_t w,
                        const BenchOptions& o, std::uint64_t seed = kDefaultSeed) {
  const Variant v = parse_variant(variant);
  return run_variant(v, make_bench_problem<T>(cfg, h, w, seed), o);
}

inline std::string bench_csv(const std::vector<BenchReport>& rows) {
  CsvWriter csv({"variant", "median_ns", "mad_ns", "moves_per_pixel", "peak_bytes", "checksum"});
  csv.comment("moves_per_pixel: max destination-accumulation events per fan-out output pixel");
  for (const auto& r : rows)
    csv.row({r.variant, format_real(r.median_ns), format_real(r.mad_ns), std::to_string(r.moves_per_output_pixel),
             std::to_string(r.peak_intermediate_bytes), r.checksum});
  return csv.str();
}

/// Independent f64 reference built from conv_ref pieces: fanout_conv on the
/// working grid, explicit zero-extended shifts, norms, branch sum.
template <Real T>
Tensor<double> oracle_forward(const BenchProblem<T>& p) {
  const auto& cfg = p.cfg;
  detail::check_forward_inputs(p.x, p.weights, cfg, p.plan);
  const auto x = p.x.template cast<double>();
  const auto bank = merged_bank(p.weights).template cast<double>();
  const std::size_t h = x.extent(1), w = x.extent(2), ghost = cfg.ghost_channels(), cs = cfg.sw_channels();
  const std::size_t g = cfg.fanout(), n = cfg.N, half = n / 2;
  Tensor<double> xs(Shape{static_cast<std::int64_t>(cs), static_cast<std::int64_t>(h), static_cast<std::int64_t>(w)});
  std::copy(x.data().begin() + static_cast<std::ptrdiff_t>(ghost * h * w), x.data().end(), xs.data().begin());
  const auto m = working_margins(cfg, p.plan);
  const auto maps = fanout_conv(xs, bank, Padding{half + m.top, half + m.bottom, half + m.left, half + m.right});
  const std::size_t gr = maps.extent(1), gc = maps.extent(2);
  auto read = [&](std::size_t c, std::size_t k, std::ptrdiff_t r, std::ptrdiff_t s) {
    r += static_cast<std::ptrdiff_t>(m.top);
    s += static_cast<std::ptrdiff_t>(m.left);
    if (r < 0 || s < 0 || r >= static_cast<std::ptrdiff_t>(gr) || s >= static_cast<std::ptrdiff_t>(gc)) return 0.0;
    return maps.at(c * g + k, static_cast<std::size_t>(r), static_cast<std::size_t>(s));
  };
  std::optional<Tensor<double>> center;
  if (cfg.has_branch(BranchType::center) && cfg.center_mode == CenterMode::independent) {
    auto cb = p.weights.center_bank->template cast<double>();
    Tensor<double> w4(Shape{static_cast<std::int64_t>(cs), 1, static_cast<std::int64_t>(n), static_cast<std::int64_t>(n)},
                      std::vector<double>(cb.data().begin(), cb.data().end()));
    center = conv2d_ref(xs, w4, ConvParams{n, n, half, half, 1, cs});
  }
  Tensor<double> y(x.shape());
  std::copy(x.data().begin(), x.data().begin() + static_cast<std::ptrdiff_t>(ghost * h * w), y.data().begin());
  for (std::size_t c = 0; c < cs; ++c)
    for (std::size_t t = 0; t < kBranchTypes; ++t) {
      const auto bt = static_cast<BranchType>(t);
      if (!cfg.has_branch(bt)) continue;
      const auto& nr = p.weights.norm[t];
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          double s = 0;
          for (std::size_t e = 0; e < cfg.E; ++e) {
            if (bt == BranchType::center) {
              s += center ? center->at(c, i, j)
                          : read(c, cfg.center_block(), static_cast<std::ptrdiff_t>(i), static_cast<std::ptrdiff_t>(j));
              continue;
            }
            for (std::size_t k = 0; k < g; ++k) {
              const auto d = p.plan.displacement(bt, e, c, k);
              s += read(c, k, static_cast<std::ptrdiff_t>(i) + d.dy, static_cast<std::ptrdiff_t>(j) + d.dx);
            }
          }
          y.at(ghost + c, i, j) += (s - static_cast<double>(nr.mean[c])) * nr.scale(c) + static_cast<double>(nr.beta[c]);
        }
    }
  return y;
}

struct VerifyRow {
  std::string variant;
  double max_abs_diff = 0;  // worst case over trials, against the oracle
  bool matches_fused = true;  // bitwise, every trial
};

/// Compares every variant against oracle_forward over `trials` weight/input
/// draws. With o.relaxed an extra parallel_relaxed row is produced.
template <Real T>
std::vector<VerifyRow> verify_variants(const SwConfig& cfg, std::size_t h, std::size_t w, std::size_t trials,
                                       const BenchOptions& o, std::uint64_t seed = kDefaultSeed) {
  if (trials == 0) throw ConfigError("trials must be at least 1");
  std::vector<VerifyRow> rows;
  for (auto v : kAllVariants) rows.push_back({to_string(v)});
  if (o.relaxed) rows.push_back({"parallel_relaxed"});
  for (std::size_t t = 0; t < trials; ++t) {
    const auto p = make_bench_problem<T>(cfg, h, w, derive_key({seed, t}));
    const auto ref = oracle_forward(p);
    BenchOptions det = o;
    det.relaxed = false;
    if (det.tile_rows == 0) det.tile_rows = 4;
    const auto fused = run_kernel(Variant::fused, p, det);
    auto score = [&](VerifyRow& row, const Tensor<T>& y) {
      row.max_abs_diff = std::max(row.max_abs_diff, max_abs_diff<double>(y.template cast<double>().data(), ref.data()));
      row.matches_fused = row.matches_fused && y.bit_equal(fused);
    };
    for (std::size_t i = 0; i < kAllVariants.size(); ++i) score(rows[i], run_kernel(kAllVariants[i], p, det));
    if (o.relaxed) {
      BenchOptions rel = det;
      rel.relaxed = true;
      score(rows.back(), run_kernel(Variant::parallel, p, rel));
    }
  }
  return rows;
}

struct SpeedupRow {
  double density = 1;       // requested
  std::size_t kept = 0;     // filters kept in every branch
  std::size_t total = 0;
  std::uint64_t macs = 0;
  double mac_reduction = 1;  // dense MACs / MACs
  double median_ns = 0;
  double time_ratio = 1;     // median / dense median
};

/// Fused-variant cost as filters are masked. Keeps round(d * C_sw * g)
/// filters (a seeded random subset, shared by all rep branches).
template <Real T>
std::vector<SpeedupRow> sparsity_speedup(const SwConfig& cfg, std::size_t h, std::size_t w,
                                         const std::vector<double>& densities, const BenchOptions& o,
                                         std::uint64_t seed = kDefaultSeed) {
  auto base = make_bench_problem<T>(cfg, h, w, seed);
  const std::size_t total = cfg.sw_channels() * cfg.fanout();
  const auto order = CounterRng({seed, 0x53504545ull}).permutation(total);
  std::vector<SpeedupRow> rows;
  std::uint64_t dense_macs = 0;
  double dense_ns = 0;
  for (std::size_t di = 0; di <= densities.size(); ++di) {
    // Index 0 is the dense reference.
    const double d = di == 0 ? 1.0 : densities[di - 1];
    if (!(d > 0.0 && d <= 1.0)) throw ConfigError("density must lie in (0,1]");
    auto p = base;
    const auto kept = static_cast<std::size_t>(std::llround(d * static_cast<double>(total)));
    for (auto& mk : p.weights.mask)
      for (std::size_t i = kept; i < total; ++i) mk.set(order[i], false);
    KernelStats st;
    (void)run_kernel(Variant::fused, p, o, &st);
    const auto samples = time_samples([&] { (void)run_kernel(Variant::fused, p, o); }, o.warmup, o.reps);
    SpeedupRow r{d, kept, total, st.macs, 1.0, median(samples), 1.0};
    if (di == 0) {
      dense_macs = st.macs;
      dense_ns = r.median_ns;
      continue;
    }
    r.mac_reduction = st.macs ? static_cast<double>(dense_macs) / static_cast<double>(st.macs) : 0.0;
    r.time_ratio = dense_ns > 0 ? r.median_ns / dense_ns : 1.0;
    rows.push_back(r);
  }
  return rows;
}

/// Desk default: C=64, H=W=56, M=51, N=3, E=4, half padding.
inline SwConfig desk_config() {
  SwConfig c;
  c.M = 51;
  c.N = 3;
  c.C = 64;
  c.E = 4;
  c.pad_mode = PadMode::half;
  return c;
}

}  // namespace swconv
