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

#include <gtest/gtest.h>

#include <cstdlib>

#include "swconv/bench.hpp"

namespace swconv {
namespace {

SwConfig small_config(std::size_t M, std::size_t N, std::size_t C, std::size_t E, PadMode pad) {
  SwConfig c;
  c.M = M;
  c.N = N;
  c.C = C;
  c.E = E;
  c.pad_mode = pad;
  return c;
}

std::vector<SwConfig> variety() {
  std::vector<SwConfig> out;
  for (auto pad : {PadMode::half, PadMode::exact, PadMode::full}) out.push_back(small_config(13, 3, 4, 2, pad));
  auto c = small_config(11, 3, 6, 3, PadMode::half);
  c.order_policy = OrderPolicy::per_edge_shuffled;
  c.G = 0.34;
  out.push_back(c);
  c.order_policy = OrderPolicy::disordered;
  c.center_mode = CenterMode::independent;
  c.b = 2;
  out.push_back(c);
  auto v = small_config(9, 3, 3, 2, PadMode::exact);
  v.branches = branch_bit(BranchType::vertical) | branch_bit(BranchType::center);
  out.push_back(v);
  out.push_back(small_config(15, 5, 2, 1, PadMode::full));
  return out;
}

TEST(BenchVariant, ParseAndUnknown) {
  for (auto v : kAllVariants) EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("winograd"), ConfigError);
  BenchOptions o;
  EXPECT_THROW(run_variant<double>("im2col", small_config(9, 3, 2, 1, PadMode::half), 8, 8, o), ConfigError);
}

TEST(BenchVariant, BitwiseEqualToEachOtherAndToForward) {
  for (const auto& cfg : variety()) {
    auto p = make_bench_problem<double>(cfg, 13, 11, 7);
    if (cfg.b == 2) p.weights.mask[1].set(0, false);
    for (auto& nr : p.weights.norm) nr = random_norm<double>(cfg.sw_channels(), 99, 1e-5);
    const auto ref = sw_forward(p.x, p.weights, cfg, p.plan, ForwardMode::inference);
    BenchOptions o;
    o.threads = 3;
    o.tile_rows = 4;
    for (auto v : kAllVariants) {
      const auto y = run_kernel(v, p, o);
      EXPECT_TRUE(y.bit_equal(ref)) << to_string(v) << "\n" << serialize(cfg);
      EXPECT_EQ(checksum(y), checksum(ref));
    }
  }
}

TEST(BenchVerify, F64WithinTolerance) {
  BenchOptions o;
  o.threads = 2;
  for (const auto& cfg : variety()) {
    const auto rows = verify_variants<double>(cfg, 12, 10, 2, o);
    ASSERT_EQ(rows.size(), 4u);
    for (const auto& r : rows) {
      EXPECT_LE(r.max_abs_diff, 1e-10) << r.variant;
      EXPECT_TRUE(r.matches_fused) << r.variant;
    }
  }
}

TEST(BenchVerify, F32RelaxedWithinTolerance) {
  BenchOptions o;
  o.threads = 4;
  o.relaxed = true;
  const auto rows = verify_variants<float>(small_config(51, 3, 8, 4, PadMode::half), 24, 24, 2, o);
  ASSERT_EQ(rows.size(), 5u);
  for (const auto& r : rows) EXPECT_LE(r.max_abs_diff, 1e-5) << r.variant;
}

TEST(BenchVerify, EmptyMaskGivesGhostOnlyExactly) {
  auto cfg = small_config(13, 3, 6, 2, PadMode::half);
  cfg.G = 0.34;
  auto p = make_bench_problem<double>(cfg, 10, 10, 3);
  for (auto& mk : p.weights.mask) mk = FilterMask(cfg.sw_channels(), cfg.fanout(), false);
  const auto ref = oracle_forward(p);
  BenchOptions o;
  o.threads = 2;
  o.tile_rows = 3;
  for (auto v : kAllVariants) {
    const auto y = run_kernel(v, p, o);
    EXPECT_EQ(max_abs_diff<double>(y.cast<double>().data(), ref.data()), 0.0) << to_string(v);
    const std::size_t plane = 100, ghost = cfg.ghost_channels();
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (i < ghost * plane)
        EXPECT_EQ(y[i], p.x[i]);
      else
        EXPECT_EQ(y[i], 0.0);
    }
  }
}

TEST(BenchCounters, FusedMovesBounded) {
  for (std::size_t E : {1u, 2u, 4u}) {
    auto p = make_bench_problem<float>(small_config(51, 3, 4, E, PadMode::half), 56, 56, 1);
    KernelStats st;
    (void)run_kernel(Variant::fused, p, BenchOptions{}, &st, true);
    EXPECT_LE(st.moves_max, 2 * E + 1);
    EXPECT_EQ(st.moves_max, 2 * E + 1);  // centre block, interior pixel
    KernelStats tiled;
    BenchOptions o;
    o.tile_rows = 8;
    (void)run_kernel(Variant::tiled, p, o, &tiled, true);
    EXPECT_EQ(tiled.moves_max, st.moves_max);
    EXPECT_EQ(tiled.moves_total, st.moves_total);
  }
}

TEST(BenchCounters, PeakScratchRatioAtLeastFanout) {
  for (auto pad : {PadMode::half, PadMode::exact}) {
    auto cfg = small_config(51, 3, 8, 1, pad);
    auto p = make_bench_problem<float>(cfg, 32, 32, 1);
    KernelStats naive, fused;
    (void)run_kernel(Variant::naive, p, BenchOptions{}, &naive);
    (void)run_kernel(Variant::fused, p, BenchOptions{}, &fused);
    EXPECT_GE(static_cast<double>(naive.peak_bytes) / static_cast<double>(fused.peak_bytes),
              static_cast<double>(cfg.fanout()));
  }
}

TEST(BenchCounters, FusedScratchIndependentOfChannelsAndFanout) {
  std::size_t first = 0;
  for (std::size_t C : {2u, 16u})
    for (std::size_t M : {9u, 51u}) {
      auto p = make_bench_problem<float>(small_config(M, 3, C, 2, PadMode::half), 20, 20, 1);
      KernelStats st;
      (void)run_kernel(Variant::fused, p, BenchOptions{}, &st);
      if (!first) first = st.peak_bytes;
      EXPECT_EQ(st.peak_bytes, first);
    }
}

TEST(BenchSparsity, MacsLinearInDensity) {
  // C_sw * g = 10 * 17 = 170; 0.6 and 0.2 keep whole filter counts.
  BenchOptions o;
  o.reps = 5;
  o.warmup = 0;
  const auto rows = sparsity_speedup<float>(small_config(51, 3, 10, 1, PadMode::half), 16, 16, {1.0, 0.6, 0.2}, o);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].mac_reduction, 1.0);
  const std::uint64_t dense = rows[0].macs;
  for (const auto& r : rows) EXPECT_EQ(r.macs * r.total, dense * r.kept);
  EXPECT_EQ(rows[1].kept, 102u);
  EXPECT_EQ(rows[1].macs * 10, dense * 6);
  EXPECT_THROW(sparsity_speedup<float>(small_config(9, 3, 2, 1, PadMode::half), 8, 8, {0.0}, o), ConfigError);
}

TEST(BenchReportTest, FieldsAndValidation) {
  const auto p = make_bench_problem<double>(small_config(13, 3, 4, 2, PadMode::half), 12, 12, 5);
  BenchOptions o;
  o.reps = 4;
  EXPECT_THROW(run_variant(Variant::fused, p, o), ConfigError);
  o.reps = 5;
  o.warmup = 1;
  const auto r = run_variant(Variant::tiled, p, o);
  EXPECT_EQ(r.samples_ns.size(), 5u);
  EXPECT_GE(r.tile_rows, 2u);
  EXPECT_LE(r.moves_per_output_pixel, 5u);
  EXPECT_EQ(r.checksum, checksum(sw_forward(p.x, p.weights, p.cfg, p.plan)));
  const auto csv = bench_csv({r});
  EXPECT_NE(csv.find("variant,median_ns,mad_ns,moves_per_pixel,peak_bytes,checksum"), std::string::npos);
}

TEST(BenchThreads, EnvironmentPinsThreadCount) {
  ::setenv("SW_NUM_THREADS", "3", 1);
  EXPECT_EQ(resolve_threads(0), 3u);
  EXPECT_EQ(resolve_threads(2), 2u);
  ::unsetenv("SW_NUM_THREADS");
  EXPECT_GE(resolve_threads(0), 1u);
}

}  // namespace
}  // namespace swconv
