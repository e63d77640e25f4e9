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

#include "oracles.hpp"
#include "swconv/arch.hpp"
#include "swconv/coverage.hpp"
#include "swconv/erf.hpp"
#include "swconv/stats.hpp"

using namespace swconv;

TEST(Stats, MedianAndMad) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_EQ(mad({1, 2, 3, 4, 100}), 1.0);
  EXPECT_THROW(median({}), ConfigError);
}

TEST(Stats, WilcoxonExactSmallCases) {
  // All 5 positive with distinct ranks: p = 1/32.
  auto r = wilcoxon_signed_rank({1, 2, 3, 4, 5});
  EXPECT_EQ(r.w_plus, 15.0);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0 / 32.0);
  // Symmetric around zero: W+ = 3 of total 6 for ranks {1,2,3}; P(W+ >= 3) = 5/8.
  auto s = wilcoxon_signed_rank({-1, 2, -3});
  EXPECT_EQ(s.w_plus, 2.0);
  EXPECT_DOUBLE_EQ(s.p_value, 6.0 / 8.0);
  EXPECT_EQ(wilcoxon_signed_rank({0, 0}).p_value, 1.0);
  // Ties share average ranks: |d| = 1,1 -> ranks 1.5 each.
  auto t = wilcoxon_signed_rank({1, 1});
  EXPECT_EQ(t.w_plus, 3.0);
  EXPECT_DOUBLE_EQ(t.p_value, 0.25);
}

TEST(Counts, StageFanouts) {
  const auto g = stage_fanouts(ArchSpec::sw_tiny());
  EXPECT_EQ(g, (std::array<std::size_t, 4>{17, 17, 16, 5}));
}

TEST(Counts, SwTinyWithinBudget) {
  const auto rep = count_macs(ArchSpec::sw_tiny(), 224);
  const double p = static_cast<double>(rep.total_params()), m = static_cast<double>(rep.total_macs());
  EXPECT_NEAR(p, 31e6, 3.1e6);
  EXPECT_NEAR(m, 5.0e9, 0.5e9);
  std::uint64_t sum = 0;
  for (const auto& r : rep.rows) sum += r.params;
  EXPECT_EQ(sum, rep.total_params());
}

TEST(Counts, CompensationInvariant) {
  auto a = ArchSpec::sw_tiny();
  a.G = 0.4;
  EXPECT_THROW(a.validate(), ConfigError);
  a.compensate = false;
  EXPECT_NO_THROW(a.validate());
  a.dims[2] = 300;
  EXPECT_THROW(a.validate(), ConfigError);
}

TEST(Counts, ArchSpecTextRoundTrip) {
  const auto a = ArchSpec::sw_small();
  const auto b = parse_arch_spec(serialize(a));
  EXPECT_EQ(b.depths, a.depths);
  EXPECT_EQ(b.dims, a.dims);
  EXPECT_EQ(parse_arch_spec("preset=small\n").depths[2], 27u);
  EXPECT_THROW(parse_arch_spec("foo=1\n"), ConfigError);
}

TEST(Counts, GrowthAndSubstitution) {
  EXPECT_EQ(full_pad_growth(5), 1u);
  EXPECT_EQ(full_pad_growth(3), 0u);
  CostSetup t;
  t.C = 1;
  t.G = 0.0;
  const auto rows = cost_table_rows(t);
  EXPECT_EQ(rows[3].closed_macs, 56u * 56 * 11 * 25);
}

// Closed forms and instrumented MAC counts agree exactly.
TEST(Counts, ClosedFormsMatchCounters) {
  for (std::size_t n : {3u, 5u}) {
    CostSetup t;
    t.N = n;
    t.H = 20;
    t.W = 18;
    const auto rows = cost_table_rows(t);
    ASSERT_EQ(rows.size(), 8u);
    for (const auto& r : rows) {
      EXPECT_EQ(r.closed_macs, r.counted_macs) << r.id << " N=" << n;
      EXPECT_EQ(r.closed_params, r.counted_params) << r.id << " N=" << n;
    }
  }
}

TEST(Coverage, OrderedMatchesClosedForm) {
  SwConfig cfg;
  cfg.M = 51;
  cfg.N = 3;
  const auto plan = build_shift_plan(cfg);
  for (std::size_t k = 0; k < 17; ++k) {
    const auto d = plan.displacement(BranchType::vertical, 0, 0, k);
    EXPECT_EQ(painted_utilization({d}, 56, 40), axis_utilization(d.dy, 56));
  }
  EXPECT_EQ(painted_utilization({{0, 0}}, 9, 9), 1.0);
  EXPECT_EQ(painted_utilization({{12, 0}}, 9, 9), 0.0);
}

TEST(Coverage, OrderedConstantInE) {
  CoverageQuery q;
  q.E = 1;
  const auto base = coverage_ratio(q);
  for (std::size_t e : {2u, 4u, 8u}) {
    q.E = e;
    const auto s = coverage_ratio(q);
    EXPECT_EQ(s.mean, base.mean);
    EXPECT_EQ(s.min, base.min);
    EXPECT_EQ(s.max, base.max);
  }
}

TEST(Coverage, ShuffledGrowsWithEdges) {
  CoverageQuery q;
  q.policy = OrderPolicy::per_edge_shuffled;
  q.seeds.clear();
  for (std::uint64_t s = 0; s < 20; ++s) q.seeds.push_back(s + 1);
  q.E = 1;
  const auto one = coverage_per_seed(q);
  q.E = 8;
  const auto eight = coverage_per_seed(q);
  std::vector<double> d;
  for (std::size_t i = 0; i < 20; ++i) d.push_back(eight[i].mean - one[i].mean);
  EXPECT_LT(wilcoxon_signed_rank(d).p_value, 0.05);
}

TEST(Erf, DepthwisePlateau) {
  DepthwiseLayer d{Tensor<double>(Shape{3, 3}, std::vector<double>(9, 1.0))};
  const auto m = erf_map({d}, 9);
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j) {
      const bool in = i >= 3 && i < 6 && j >= 3 && j < 6;
      EXPECT_EQ(m.at(i, j), in ? 1.0 : 0.0);
    }
}

TEST(Erf, NonlinearOrUnfoldedRejected) {
  EXPECT_THROW(erf_map({ActivationLayer{"gelu"}}, 9), MustFoldError);
  auto lay = from_strip(oracle::random_tensor<double>(Shape{1, 9, 3}, 1));
  lay.weights.norm[0] = random_norm<double>(1, 2, 1e-5);
  EXPECT_THROW(erf_map({SwLayer{lay.cfg, lay.weights, lay.plan}}, 9), MustFoldError);
  EXPECT_THROW(erf_map({}, 8), ConfigError);
}

TEST(Erf, SwFromStripEqualsStripErf) {
  auto k = oracle::random_tensor<double>(Shape{1, 51, 3}, 3);
  auto lay = from_strip(k);
  Tensor<double> k2(Shape{51, 3}, std::vector<double>(k.data().begin(), k.data().end()));
  const auto a = erf_map({SwLayer{lay.cfg, lay.weights, lay.plan}}, 63);
  const auto b = erf_map({DepthwiseLayer{k2}}, 63);
  EXPECT_LE(max_abs_diff(a, b), 1e-6);
}

// Adjoint pass equals forward impulse responses.
TEST(Erf, AdjointMatchesImpulseResponses) {
  for (auto pm : {PadMode::exact, PadMode::half, PadMode::full}) {
    SwConfig cfg;
    cfg.M = 9;
    cfg.N = 3;
    cfg.E = 2;
    cfg.b = 2;
    cfg.pad_mode = pm;
    cfg.order_policy = OrderPolicy::per_edge_shuffled;
    cfg.center_mode = pm == PadMode::full ? CenterMode::independent : CenterMode::shared;
    auto w = random_sw_weights<double>(cfg, 4);
    const auto plan = build_shift_plan(cfg);
    auto dk = oracle::random_tensor<double>(Shape{3, 5}, 5);
    const std::size_t p = 15;
    const auto a = erf_map({DepthwiseLayer{dk}, SwLayer{cfg, w, plan}}, p);

    Tensor<double> k3(Shape{1, 3, 5}, std::vector<double>(dk.data().begin(), dk.data().end()));
    Tensor<double> raw(Shape{p, p});
    double mx = 0;
    for (std::size_t q = 0; q < p * p; ++q) {
      Tensor<double> x(Shape{1, (long)p, (long)p});
      x[q] = 1.0;
      auto y = sw_forward(oracle::depthwise_same(x, k3), w, cfg, plan);
      raw[q] = std::fabs(y.at(0, p / 2, p / 2));
      mx = std::max(mx, raw[q]);
    }
    for (auto& v : raw.data()) v /= mx;
    EXPECT_LE(max_abs_diff(a, raw), 1e-10) << to_string(pm);
  }
}

TEST(Erf, VerticallySymmetricKernelGivesSymmetricErf) {
  auto k = oracle::random_tensor<double>(Shape{9, 3}, 6);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) k.at(8 - i, j) = k.at(i, j);
  // One layer: each entry is a single tap, so the mirror is bitwise.
  const auto one = erf_map({DepthwiseLayer{k}}, 21);
  for (std::size_t i = 0; i < 21; ++i)
    for (std::size_t j = 0; j < 21; ++j) EXPECT_EQ(one.at(i, j), one.at(20 - i, j));
  // Stacks sum mirrored products in a different order.
  const auto two = erf_map({DepthwiseLayer{k}, DepthwiseLayer{k}}, 21);
  for (std::size_t i = 0; i < 21; ++i)
    for (std::size_t j = 0; j < 21; ++j) EXPECT_NEAR(two.at(i, j), two.at(20 - i, j), 1e-15);
  auto lay = from_strip(Tensor<double>(Shape{1, 9, 3}, std::vector<double>(k.data().begin(), k.data().end())));
  const auto sw = erf_map({SwLayer{lay.cfg, lay.weights, lay.plan}}, 21);
  for (std::size_t i = 0; i < 21; ++i)
    for (std::size_t j = 0; j < 21; ++j) EXPECT_EQ(sw.at(i, j), sw.at(20 - i, j));
}
