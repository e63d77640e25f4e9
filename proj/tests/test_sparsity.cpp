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

#include <chrono>

#include "oracles.hpp"
#include "swconv/sparsity.hpp"

using namespace swconv;

namespace {

Tensor<double> scores_of(std::vector<double> v, long c, long g) { return Tensor<double>(Shape{c, g}, std::move(v)); }

struct Sim {
  BankSet<double> banks;
  SparsityState st;
};

Sim make_sim(std::size_t layers, std::size_t b, SparsitySchedule sc, InitPolicy init, std::uint64_t seed) {
  BankSet<double> banks;
  for (std::size_t l = 0; l < layers; ++l) {
    banks.emplace_back();
    for (std::size_t r = 0; r < b; ++r)
      banks.back().push_back(oracle::random_tensor<double>(Shape{6, 7, 3, 3}, seed * 1000 + l * 10 + r));
  }
  auto masks = init_sparsity(init, banks, sc.s, seed);
  return {banks, make_sparsity_state(sc, std::move(masks))};
}

ScoreSet grow_for(const Sim& s, GrowStream kind, std::uint64_t seed, std::size_t update) {
  ScoreSet g;
  for (std::size_t l = 0; l < s.banks.size(); ++l) {
    g.emplace_back();
    for (std::size_t r = 0; r < s.banks[l].size(); ++r)
      g.back().push_back(grow_scores(kind, score_filters(s.banks[l][r]), seed, l, r, update));
  }
  return g;
}

}  // namespace

TEST(ScoreFilters, MagnitudeSum) {
  Tensor<double> bank(Shape{1, 2, 2, 2}, {1, -2, 0, 3, 0, 0, 0, 0});
  auto s = score_filters(bank);
  EXPECT_EQ(s[0], 6.0);
  EXPECT_EQ(s[1], 0.0);
  Tensor<double> neg = bank;
  for (auto& v : neg.data()) v = -v;
  EXPECT_TRUE(score_filters(neg).bit_equal(s));
}

TEST(PruneToTarget, Examples) {
  auto s = scores_of({5, 3, 9, 1, 7, 2, 8, 4, 6, 10}, 2, 5);
  auto m = prune_to_target(s, 0.4);
  EXPECT_EQ(m.pruned_count(), 4u);
  for (std::size_t i : {3u, 5u, 1u, 7u}) EXPECT_FALSE(m.kept(i));
  EXPECT_EQ(prune_to_target(s, 0.0).pruned_count(), 0u);
  auto eq = prune_to_target(scores_of({1, 1, 1, 1}, 2, 2), 0.5);
  EXPECT_FALSE(eq.kept(0, 0));
  EXPECT_FALSE(eq.kept(0, 1));
  EXPECT_TRUE(eq.kept(1, 0));
  EXPECT_THROW(prune_to_target(s, 1.0), ConfigError);
}

TEST(GrowFilters, Examples) {
  auto s = scores_of({1, 2, 3, 4}, 1, 4);
  FilterMask m(1, 4, true);
  m.set(0, 2, false);
  EXPECT_EQ(grow_filters(m, s, 0).mask, m);
  auto r = grow_filters(m, s, 1);
  EXPECT_EQ(r.mask.pruned_count(), 0u);
  auto c = grow_filters(m, s, 3);
  EXPECT_TRUE(c.clipped);
  EXPECT_EQ(c.grown, 1u);
}

// Property: prune k then grow k with scores favouring the pruned set restores the mask.
TEST(GrowFilters, PruneGrowRoundTrip) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto mag = oracle::random_tensor<double>(Shape{5, 6}, seed, 0, 1);
    auto start = prune_to_target(mag, 0.3);
    auto pruned = prune_lowest(mag, start, 4);
    Tensor<double> favour(mag.shape());
    for (std::size_t i = 0; i < favour.size(); ++i) favour[i] = start.kept(i) && !pruned.kept(i) ? 1.0 : 0.0;
    EXPECT_EQ(grow_filters(pruned, favour, 4).mask, start);
  }
}

TEST(SparsityStep, NoUpdateBetweenPeriods) {
  SparsitySchedule sc;
  sc.u = 100;
  auto sim = make_sim(2, 2, sc, InitPolicy::uniform, 1);
  const auto before = sim.st.masks;
  for (std::size_t step = 1; step < 100; ++step) {
    sim.st.step = step;
    EXPECT_FALSE(sparsity_step(sim.st, sim.banks, grow_for(sim, GrowStream::uniform, 1, 0)).updated);
  }
  EXPECT_EQ(sim.st.masks, before);
  sim.st.step = 100;
  EXPECT_TRUE(sparsity_step(sim.st, sim.banks, grow_for(sim, GrowStream::uniform, 1, 1)).updated);
}

TEST(SparsityStep, GapThreeSyncSchedule) {
  SparsitySchedule sc;
  sc.u = 10;
  sc.share_gap = 3;
  sc.horizon = 200;
  auto sim = make_sim(3, 2, sc, InitPolicy::uniform, 2);
  std::vector<std::size_t> synced;
  for (std::size_t step = 1; step <= 120; ++step) {
    sim.st.step = step;
    const auto o = sparsity_step(sim.st, sim.banks, grow_for(sim, GrowStream::uniform, 2, sim.st.updates + 1));
    if (o.synced) {
      synced.push_back(o.update_index);
      for (const auto& layer : sim.st.masks) EXPECT_EQ(layer[0], layer[1]);
    }
  }
  EXPECT_EQ(synced, (std::vector<std::size_t>{3, 6, 9, 12}));
}

// Property: every update restores each layer's pruned count exactly.
TEST(SparsityStep, SparsityConserved) {
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    for (auto kind : {GrowStream::uniform, GrowStream::adversarial, GrowStream::persistent}) {
      SparsitySchedule sc;
      sc.s = 0.1 + 0.1 * static_cast<double>(seed);
      sc.u = 5;
      sc.share_gap = 2;
      sc.horizon = 100;
      auto sim = make_sim(3, 2, sc, InitPolicy::uniform, seed);
      for (std::size_t step = 1; step <= 100; ++step) {
        sim.st.step = step;
        if (!sparsity_step(sim.st, sim.banks, grow_for(sim, kind, seed, sim.st.updates + 1)).updated) continue;
        for (const auto& layer : sim.st.masks)
          for (const auto& m : layer) EXPECT_LT(std::fabs(m.sparsity() - sc.s), 1.0 / static_cast<double>(m.size()));
      }
    }
}

TEST(SparsityStep, DeterministicTrajectory) {
  auto run = [] {
    SparsitySchedule sc;
    sc.u = 3;
    sc.share_gap = 2;
    sc.horizon = 60;
    auto sim = make_sim(2, 3, sc, InitPolicy::branch_mean_init, 9);
    std::vector<MaskSet> traj;
    for (std::size_t step = 1; step <= 60; ++step) {
      sim.st.step = step;
      if (sparsity_step(sim.st, sim.banks, grow_for(sim, GrowStream::uniform, 9, sim.st.updates + 1)).updated)
        traj.push_back(sim.st.masks);
    }
    return traj;
  };
  EXPECT_EQ(run(), run());
}

TEST(SparsityStep, SubsetPolicyNestsMasks) {
  SparsitySchedule sc;
  sc.u = 1;
  sc.policy = MaskPolicy::subset;
  auto sim = make_sim(2, 3, sc, InitPolicy::uniform, 4);
  sim.st.step = 1;
  ASSERT_TRUE(sparsity_step(sim.st, sim.banks, grow_for(sim, GrowStream::uniform, 4, 1)).synced);
  for (const auto& layer : sim.st.masks) {
    for (std::size_t r = 1; r < 3; ++r) {
      for (std::size_t i = 0; i < layer[r].size(); ++i) {
        if (layer[r].kept(i)) {
          EXPECT_TRUE(layer[r - 1].kept(i));
        }
      }
      EXPECT_GT(layer[r].pruned_count(), layer[r - 1].pruned_count());
    }
  }
}

TEST(SparsityStep, ShapeMismatchThrows) {
  SparsitySchedule sc;
  sc.u = 1;
  auto sim = make_sim(2, 2, sc, InitPolicy::uniform, 1);
  sim.st.step = 1;
  auto g = grow_for(sim, GrowStream::uniform, 1, 1);
  g.pop_back();
  EXPECT_THROW(sparsity_step(sim.st, sim.banks, g), ShapeError);
}

TEST(InitSparsity, Examples) {
  BankSet<double> same;
  for (std::uint64_t l = 0; l < 3; ++l) {
    auto w = oracle::random_tensor<double>(Shape{4, 5, 3, 3}, l);
    same.push_back({w, w});
  }
  auto a = init_sparsity(InitPolicy::sum_then_prune, same, 0.4);
  auto b = init_sparsity(InitPolicy::branch_mean_init, same, 0.4);
  for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(a[l][0].pruned_count(), b[l][0].pruned_count());

  for (auto p : {InitPolicy::uniform, InitPolicy::sum_then_prune, InitPolicy::branch_mean_init, InitPolicy::subset})
    for (const auto& layer : init_sparsity(p, same, 0.0))
      for (const auto& m : layer) EXPECT_EQ(m.pruned_count(), 0u);

  // Disjoint score ranges: branch 1 dwarfs branch 0 in layer 0 only.
  BankSet<double> skew;
  for (std::uint64_t l = 0; l < 3; ++l) {
    auto w0 = oracle::random_tensor<double>(Shape{4, 5, 3, 3}, 10 + l, 0.0, 1.0);
    auto w1 = oracle::random_tensor<double>(Shape{4, 5, 3, 3}, 20 + l, l == 0 ? 10.0 : 0.0, l == 0 ? 11.0 : 1.0);
    skew.push_back({w0, w1});
  }
  auto c = init_sparsity(InitPolicy::sum_then_prune, skew, 0.4);
  auto d = init_sparsity(InitPolicy::branch_mean_init, skew, 0.4);
  EXPECT_NE(c, d);
}

TEST(MaskStats, DenseAndBaseline) {
  const auto arch = ArchSpec::sw_tiny();
  MaskSet dense;
  for (std::size_t l = 0; l < arch.layers(); ++l) {
    const auto cfg = arch.layer_config(l);
    dense.push_back({FilterMask(cfg.sw_channels(), cfg.fanout(), true), FilterMask(cfg.sw_channels(), cfg.fanout(), true)});
  }
  auto st = mask_stats(dense, arch);
  for (const auto& r : st.layers) EXPECT_EQ(r.sparsity, 0.0);
  for (const auto& h : st.histogram) EXPECT_EQ(h.group_fraction, h.pruned_count == 0 ? 1.0 : 0.0);
  EXPECT_DOUBLE_EQ(st.baseline[0], 1.0 / 17);
  EXPECT_DOUBLE_EQ(st.baseline[2], 1.0 / 16);
  EXPECT_DOUBLE_EQ(st.baseline[3], 1.0 / 5);

  // One pruned filter per group gives stage sparsity 1/g.
  MaskSet one = dense;
  for (std::size_t l = 0; l < one.size(); ++l)
    for (auto& m : one[l])
      for (std::size_t c = 0; c < m.channels(); ++c) m.set(c, (c + l) % m.fanout(), false);
  auto so = mask_stats(one, arch);
  for (const auto& r : so.layers) EXPECT_DOUBLE_EQ(r.sparsity, so.baseline[r.stage]);
  one.pop_back();
  EXPECT_THROW(mask_stats(one, arch), ShapeError);
}

// Monte Carlo: uniformly random masks give per-index fractions near s, and
// almost no fully pruned group for s <= 0.4, g >= 5.
TEST(MaskStats, RandomMasksMatchBinomial) {
  const auto arch = ArchSpec::sw_tiny();
  const double s = 0.4;
  MaskSet masks;
  for (std::size_t l = 0; l < arch.layers(); ++l) {
    const auto cfg = arch.layer_config(l);
    FilterMask m(cfg.sw_channels(), cfg.fanout(), true);
    CounterRng rng({5, l});
    for (std::size_t i = 0; i < m.size(); ++i) m.set(i, rng.uniform01() >= s);
    masks.push_back({m});
  }
  auto st = mask_stats(masks, arch);
  std::array<std::size_t, 4> groups{};
  for (std::size_t l = 0; l < arch.layers(); ++l) groups[arch.stage_of(l)] += arch.layer_config(l).sw_channels();
  for (const auto& r : st.per_index) {
    const double sigma = std::sqrt(s * (1 - s) / static_cast<double>(groups[r.stage]));
    EXPECT_NEAR(r.pruned_fraction, s, 3 * sigma) << "stage " << r.stage << " k " << r.k;
  }
  for (std::size_t sg = 0; sg < 4; ++sg) EXPECT_LT(st.all_pruned_groups[sg], 0.015);
}

TEST(SparsityStep, TenThousandStepsQuick) {
  const auto arch = ArchSpec::sw_tiny();
  SparsitySchedule sc;
  sc.share_gap = 3;
  auto banks = arch_banks<float>(arch, 1);
  auto st = make_sparsity_state(sc, init_sparsity(InitPolicy::uniform, banks, sc.s));
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t step = 1; step <= 10000; ++step) {
    st.step = step;
    if (step % sc.u) continue;
    ScoreSet g;
    for (std::size_t l = 0; l < banks.size(); ++l) {
      g.emplace_back();
      for (std::size_t r = 0; r < banks[l].size(); ++r)
        g.back().push_back(grow_scores(GrowStream::uniform, score_filters(banks[l][r]), 1, l, r, step));
    }
    sparsity_step(st, banks, g);
  }
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(st.updates, 100u);
  EXPECT_LT(sec, 10.0);
}
