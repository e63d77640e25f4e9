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

// Named verification checks shared by the command-line front end and the
// acceptance runner. Each returns a CheckResult; none of them throws for a
// failed comparison.

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "swconv/arch.hpp"
#include "swconv/bench.hpp"
#include "swconv/coverage.hpp"
#include "swconv/erf.hpp"
#include "swconv/reparam.hpp"
#include "swconv/sparsity.hpp"
#include "swconv/sw_op.hpp"

namespace swconv {

struct CheckResult {
  std::string name;
  bool passed = true;
  std::size_t cases = 0;
  double max_diff = 0.0;
  double tol = 0.0;
  std::string note;
  double seconds = 0.0;  // wall clock, reported but never compared
};

/// Runs `body`, timing it and turning exceptions into a failed result.
inline CheckResult timed_check(const std::string& name, const std::function<void(CheckResult&)>& body) {
  CheckResult r;
  r.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.note = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline void record(CheckResult& r, double diff) {
  ++r.cases;
  if (!(diff <= r.max_diff)) r.max_diff = std::isnan(diff) ? diff : std::max(r.max_diff, diff);
  if (!(diff <= r.tol)) r.passed = false;
}

template <Real T>
Tensor<T> random_tensor(Shape s, std::uint64_t key, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(s));
  CounterRng rng(key);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

/// One randomized strip configuration.
struct SweepCase {
  std::size_t M = 3, N = 3, C = 1, H = 8, W = 8;
  std::uint64_t key = 0;
};

/// M odd in [N, 51], N in {3, 5}, C in [1, 8], H and W in [8, 40].
inline std::vector<SweepCase> sweep_cases(std::size_t count, std::uint64_t seed) {
  std::vector<SweepCase> out;
  for (std::size_t i = 0; i < count; ++i) {
    CounterRng rng({seed, i, 0x53574550ull});
    SweepCase c;
    c.N = rng.bounded(2) ? 5 : 3;
    c.M = c.N + 2 * rng.bounded((51 - c.N) / 2 + 1);
    c.C = 1 + rng.bounded(8);
    c.H = 8 + rng.bounded(33);
    c.W = 8 + rng.bounded(33);
    c.key = derive_key({seed, i});
    out.push_back(c);
  }
  return out;
}

inline Shape chw(std::size_t c, std::size_t h, std::size_t w) {
  return Shape{static_cast<std::int64_t>(c), static_cast<std::int64_t>(h), static_cast<std::int64_t>(w)};
}

/// from_strip operator in exact mode against strip_conv_ref (f64 reference).
template <Real T>
CheckResult check_exact_equivalence(const std::vector<SweepCase>& cases, double tol) {
  return timed_check(std::string("exact_equivalence_") + dtype_name(dtype_of<T>()), [&](CheckResult& r) {
    r.tol = tol;
    for (const auto& sc : cases) {
      const auto k = random_tensor<double>(chw(sc.C, sc.M, sc.N), derive_key({sc.key, 1}));
      const auto x = random_tensor<double>(chw(sc.C, sc.H, sc.W), derive_key({sc.key, 2}));
      const auto ref = strip_conv_ref(x, k);
      const auto lay = from_strip(k.template cast<T>());
      const auto y = sw_forward(x.template cast<T>(), lay.weights, lay.cfg, lay.plan);
      record(r, max_abs_diff(y.template cast<double>(), ref));
    }
  });
}

/// Full three-branch operator sized like each sweep case: half padding equals
/// exact padding on the interior band.
inline CheckResult check_interior_band(const std::vector<SweepCase>& cases, double tol = 1e-12) {
  return timed_check("interior_band", [&](CheckResult& r) {
    r.tol = tol;
    std::size_t skipped = 0;
    for (const auto& sc : cases) {
      CounterRng rng({sc.key, 3});
      SwConfig cfg;
      cfg.M = sc.M;
      cfg.N = sc.N;
      cfg.C = sc.C;
      cfg.E = 1 + rng.bounded(3);
      cfg.order_policy = static_cast<OrderPolicy>(rng.bounded(3));
      cfg.seed = sc.key;
      const auto band = interior_band(cfg, sc.H, sc.W);
      if (band.empty) {
        ++skipped;
        continue;
      }
      const auto w = random_sw_weights<double>(cfg, sc.key);
      const auto plan = build_shift_plan(cfg);
      const auto x = random_tensor<double>(chw(sc.C, sc.H, sc.W), derive_key({sc.key, 4}));
      cfg.pad_mode = PadMode::exact;
      const auto ye = sw_forward(x, w, cfg, plan);
      cfg.pad_mode = PadMode::half;
      const auto yh = sw_forward(x, w, cfg, plan);
      double d = 0;
      for (std::size_t c = 0; c < sc.C; ++c)
        for (std::size_t i = band.row_begin; i < band.row_end; ++i)
          for (std::size_t j = band.col_begin; j < band.col_end; ++j)
            d = std::max(d, std::fabs(yh.at(c, i, j) - ye.at(c, i, j)));
      record(r, d);
    }
    r.note = std::to_string(skipped) + " configs with empty band skipped";
  });
}

/// Random exact-mode operator (all branches, rep banks, masks, norms) for
/// case `sc`; E, b, order, centre mode drawn from its key.
inline std::pair<SwConfig, SwWeights<double>> random_operator(const SweepCase& sc, bool norms) {
  CounterRng rng({sc.key, 5});
  SwConfig cfg;
  cfg.M = sc.M;
  cfg.N = sc.N;
  cfg.C = sc.C + 1;
  cfg.G = rng.bounded(2) ? 0.3 : 0.0;
  cfg.E = 1 + rng.bounded(3);
  cfg.b = 1 + rng.bounded(3);
  cfg.order_policy = static_cast<OrderPolicy>(rng.bounded(3));
  cfg.center_mode = rng.bounded(2) ? CenterMode::independent : CenterMode::shared;
  cfg.pad_mode = PadMode::exact;
  cfg.seed = sc.key;
  auto w = random_sw_weights<double>(cfg, sc.key);
  for (auto& m : w.mask)
    for (std::size_t f = 0; f < m.size(); ++f)
      if (rng.uniform01() < 0.2) m.set(f, false);
  if (norms)
    for (std::size_t t = 0; t < kBranchTypes; ++t)
      w.norm[t] = random_norm<double>(cfg.sw_channels(), derive_key({sc.key, 6, t}), 1e-5);
  return {cfg, std::move(w)};
}

/// Dense kernel from densify / densify_folded against the exact forward.
inline CheckResult check_densify(const std::vector<SweepCase>& cases, double tol = 1e-10) {
  return timed_check("densify", [&](CheckResult& r) {
    r.tol = tol;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const bool norms = i % 2 == 1;
      const auto [cfg, w] = random_operator(cases[i], norms);
      const auto plan = build_shift_plan(cfg);
      const auto x = random_tensor<double>(chw(cfg.C, cases[i].H, cases[i].W), derive_key({cases[i].key, 7}));
      const auto d = norms ? densify_folded(w, plan, cfg) : densify(w, plan, cfg);
      record(r, max_abs_diff(apply_dense(x, d), sw_forward(x, w, cfg, plan)));
    }
  });
}

/// ERF of the from_strip operator against the strip kernel's ERF.
inline CheckResult check_erf_strip(std::size_t count, std::uint64_t seed, std::size_t probe = 63, double tol = 1e-6) {
  return timed_check("erf_strip", [&](CheckResult& r) {
    r.tol = tol;
    for (std::size_t i = 0; i < count; ++i) {
      CounterRng rng({seed, i, 0x455246ull});
      const std::size_t n = rng.bounded(2) ? 5 : 3;
      const std::size_t m = n + 2 * rng.bounded((51 - n) / 2 + 1);
      const auto k = random_tensor<double>(chw(1, m, n), derive_key({seed, i, 8}));
      const auto lay = from_strip(k);
      const Tensor<double> k2(Shape{static_cast<std::int64_t>(m), static_cast<std::int64_t>(n)},
                              std::vector<double>(k.data().begin(), k.data().end()));
      const auto a = erf_map({SwLayer{lay.cfg, lay.weights, lay.plan}}, probe);
      const auto b = erf_map({DepthwiseLayer{k2}}, probe);
      record(r, max_abs_diff(a, b));
    }
  });
}

/// conv(fold_norm(w, b, n)) + b' against norm(conv(w) + b) evaluated directly.
inline CheckResult check_fold(std::size_t count, std::uint64_t seed, double tol = 1e-10) {
  return timed_check("fold_norm", [&](CheckResult& r) {
    r.tol = tol;
    for (std::size_t i = 0; i < count; ++i) {
      CounterRng rng({seed, i, 0x464f4cull});
      const std::size_t c = 1 + rng.bounded(6), kh = 1 + 2 * rng.bounded(3), kw = 1 + 2 * rng.bounded(3);
      const std::size_t h = 5 + rng.bounded(10), wd = 5 + rng.bounded(10);
      const auto x = random_tensor<double>(chw(c, h, wd), derive_key({seed, i, 1}));
      const auto w = random_tensor<double>(Shape{static_cast<std::int64_t>(c), 1, static_cast<std::int64_t>(kh),
                                                 static_cast<std::int64_t>(kw)},
                                           derive_key({seed, i, 2}));
      const auto bt = random_tensor<double>(Shape{static_cast<std::int64_t>(c)}, derive_key({seed, i, 3}));
      const std::vector<double> bias(bt.data().begin(), bt.data().end());
      const auto nr = random_norm<double>(c, derive_key({seed, i, 4}), rng.bounded(2) ? 1e-5 : 0.0);
      const ConvParams p{kh, kw, kh / 2, kw / 2, 1, c};
      auto ref = conv2d_ref(x, w, p);
      const std::size_t plane = h * wd;
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t q = 0; q < plane; ++q) {
          auto& v = ref[ch * plane + q];
          v = (v + bias[ch] - nr.mean[ch]) * nr.gamma[ch] / std::sqrt(nr.var[ch] + nr.eps) + nr.beta[ch];
        }
      const auto f = fold_norm(w, bias, nr);
      auto y = conv2d_ref(x, f.weight, p);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t q = 0; q < plane; ++q) y[ch * plane + q] += f.bias[ch];
      record(r, max_abs_diff(y, ref));
    }
  });
}

/// Fan-out conv with merge_rep of masked banks against the sum of per-branch
/// convs, and the train-shape forward against the merged inference forward.
inline CheckResult check_merge(const std::vector<SweepCase>& cases, double tol = 1e-10) {
  return timed_check("merge_rep", [&](CheckResult& r) {
    r.tol = tol;
    for (const auto& sc : cases) {
      const auto [cfg, w] = random_operator(sc, true);
      const auto x = random_tensor<double>(chw(cfg.C, sc.H, sc.W), derive_key({sc.key, 9}));
      const auto plan = build_shift_plan(cfg);
      record(r, max_abs_diff(sw_forward(x, w, cfg, plan, ForwardMode::train_shape),
                             sw_forward(x, w, cfg, plan, ForwardMode::inference)));
      const auto xs = random_tensor<double>(chw(cfg.sw_channels(), sc.H, sc.W), derive_key({sc.key, 10}));
      std::vector<Tensor<double>> masked;
      Tensor<double> sum;
      for (std::size_t b = 0; b < w.rep.size(); ++b) {
        masked.push_back(apply_mask(w.rep[b], w.mask[b]));
        auto y = fanout_conv(xs, masked.back(), cfg.N / 2);
        if (sum.empty()) sum = Tensor<double>(y.shape());
        for (std::size_t i = 0; i < y.size(); ++i) sum[i] += y[i];
      }
      record(r, max_abs_diff(fanout_conv(xs, merge_rep(masked), cfg.N / 2), sum));
    }
  });
}

/// Consistency checks on one operator instance (user spec and weights).
template <Real T>
std::vector<CheckResult> check_operator(const SwConfig& cfg, const SwWeights<T>& w, std::size_t h, std::size_t wd,
                                        std::uint64_t seed, double tol) {
  std::vector<CheckResult> out;
  const auto plan = build_shift_plan(cfg);
  const auto x = random_tensor<T>(chw(cfg.C, h, wd), derive_key({seed, 0x4f50ull}));
  out.push_back(timed_check("weights_finite", [&](CheckResult& r) {
    auto scan = [&](std::span<const T> v) {
      for (T a : v)
        if (!std::isfinite(static_cast<double>(a))) r.passed = false;
      ++r.cases;
    };
    for (const auto& b : w.rep) scan(b.data());
    for (const auto& n : w.norm)
      for (const auto* v : {&n.gamma, &n.beta, &n.mean, &n.var}) scan(*v);
    if (w.center_bank) scan(w.center_bank->data());
    if (!r.passed) r.note = "non-finite weight values";
  }));
  out.push_back(timed_check("train_vs_inference", [&](CheckResult& r) {
    r.tol = tol;
    record(r, max_abs_diff(sw_forward(x, w, cfg, plan, ForwardMode::train_shape),
                           sw_forward(x, w, cfg, plan, ForwardMode::inference)));
  }));
  out.push_back(timed_check("densify", [&](CheckResult& r) {
    r.tol = tol;
    auto ex = cfg;
    ex.pad_mode = PadMode::exact;
    record(r, max_abs_diff(apply_dense(x, densify_folded(w, plan, ex)), sw_forward(x, w, ex, plan)));
  }));
  out.push_back(timed_check("interior_band", [&](CheckResult& r) {
    r.tol = tol;
    auto c2 = cfg;
    c2.pad_mode = PadMode::exact;
    const auto ye = sw_forward(x, w, c2, plan);
    c2.pad_mode = PadMode::half;
    const auto yh = sw_forward(x, w, c2, plan);
    const auto band = interior_band(c2, h, wd);
    if (band.empty) {
      r.note = "empty band";
      return;
    }
    double d = 0;
    for (std::size_t c = 0; c < cfg.C; ++c)
      for (std::size_t i = band.row_begin; i < band.row_end; ++i)
        for (std::size_t j = band.col_begin; j < band.col_end; ++j)
          d = std::max(d, std::fabs(static_cast<double>(yh.at(c, i, j)) - static_cast<double>(ye.at(c, i, j))));
    record(r, d);
  }));
  out.push_back(timed_check("variants", [&](CheckResult& r) {
    r.tol = tol;
    BenchProblem<T> p{cfg, plan, w, x};
    const auto ref = oracle_forward(p);
    BenchOptions o;
    o.tile_rows = 4;
    const auto fused = run_kernel(Variant::fused, p, o);
    for (auto v : kAllVariants) {
      const auto y = run_kernel(v, p, o);
      record(r, max_abs_diff<double>(y.template cast<double>().data(), ref.data()));
      if (!y.bit_equal(fused)) {
        r.passed = false;
        r.note = std::string(to_string(v)) + " differs from fused";
      }
    }
  }));
  return out;
}

// ---------------------------------------------------------------------------
// Budget, coverage, sparsity and bench checks.

inline CheckResult check_budget(const ArchSpec& a, double params_ref = 31e6, double macs_ref = 5.0e9,
                                double band = 0.10) {
  return timed_check("budget_sw_tiny", [&](CheckResult& r) {
    r.tol = band;
    const auto rep = count_arch(a, 224);
    const double dp = std::fabs(static_cast<double>(rep.total_params()) / params_ref - 1.0);
    const double dm = std::fabs(static_cast<double>(rep.total_macs()) / macs_ref - 1.0);
    record(r, dp);
    record(r, dm);
    r.note = "params=" + std::to_string(rep.total_params()) + " macs=" + std::to_string(rep.total_macs());
  });
}

inline CheckResult check_cost_forms(const std::vector<CostSetup>& setups) {
  return timed_check("cost_closed_forms", [&](CheckResult& r) {
    for (const auto& t : setups)
      for (const auto& row : cost_table_rows(t)) {
        ++r.cases;
        if (row.closed_macs != row.counted_macs || row.closed_params != row.counted_params) {
          r.passed = false;
          r.note += row.id + " N=" + std::to_string(t.N) + " mismatch; ";
        }
      }
  });
}

inline CheckResult check_fanouts(const ArchSpec& a, const std::array<std::size_t, 4>& expect) {
  return timed_check("stage_fanouts", [&](CheckResult& r) {
    const auto g = stage_fanouts(a);
    r.cases = 4;
    r.passed = g == expect;
    r.note = detail::join(g);
  });
}

inline CheckResult check_coverage_ordered(const CoverageQuery& base, const std::vector<std::size_t>& edges) {
  return timed_check("coverage_ordered_constant", [&](CheckResult& r) {
    auto q = base;
    q.policy = OrderPolicy::ordered;
    q.E = edges.front();
    const auto ref = coverage_ratio(q);
    for (auto e : edges) {
      q.E = e;
      const auto s = coverage_ratio(q);
      ++r.cases;
      if (s.mean != ref.mean || s.min != ref.min || s.max != ref.max) r.passed = false;
    }
    r.note = "mean=" + format_real(ref.mean);
  });
}

/// Shuffled per-edge utilization is non-decreasing in E (seed means) and
/// larger at the last E than the first by a one-sided signed-rank test.
inline CheckResult check_coverage_shuffled(const CoverageQuery& base, const std::vector<std::size_t>& edges,
                                           double alpha = 0.05) {
  return timed_check("coverage_shuffled_increasing", [&](CheckResult& r) {
    auto q = base;
    q.policy = OrderPolicy::per_edge_shuffled;
    std::vector<std::vector<CoverageStats>> per;
    double prev = -1;
    for (auto e : edges) {
      q.E = e;
      per.push_back(coverage_per_seed(q));
      double m = 0;
      for (const auto& s : per.back()) m += s.mean;
      m /= static_cast<double>(per.back().size());
      ++r.cases;
      if (m < prev) r.passed = false;
      prev = m;
      r.note += "E=" + std::to_string(e) + ":" + format_real(m) + " ";
    }
    std::vector<double> diffs;
    for (std::size_t i = 0; i < per.front().size(); ++i) diffs.push_back(per.back()[i].mean - per.front()[i].mean);
    const auto w = wilcoxon_signed_rank(diffs);
    r.note += "p=" + format_real(w.p_value);
    r.max_diff = w.p_value;
    r.tol = alpha;
    if (!(w.p_value < alpha)) r.passed = false;
  });
}

/// Outcome of a simulated prune-and-grow run.
struct SparsityTrace {
  struct Update {
    std::size_t index = 0, step = 0;
    bool synced = false;
    std::size_t max_dev = 0;      // max |pruned - target| over (layer, branch)
    bool branches_equal = true;   // every layer's branch masks identical
    double sparsity = 0;          // global pruned fraction, merged view
  };
  std::vector<Update> updates;
  MaskSet final_masks;
  std::uint64_t digest = 0;
};

struct SparsitySimConfig {
  ArchSpec arch = ArchSpec::sw_tiny();
  SparsitySchedule schedule;
  InitPolicy init = InitPolicy::uniform;
  GrowStream grow = GrowStream::uniform;
  std::size_t steps = 10000;
};

inline SparsityTrace simulate_sparsity(const SparsitySimConfig& sim) {
  const auto banks = arch_banks<float>(sim.arch, sim.schedule.seed);
  auto st = make_sparsity_state(sim.schedule, init_sparsity(sim.init, banks, sim.schedule.s, sim.schedule.seed));
  SparsityTrace tr;
  std::vector<std::vector<Tensor<double>>> mags(banks.size());
  for (std::size_t l = 0; l < banks.size(); ++l)
    for (const auto& b : banks[l]) mags[l].push_back(score_filters(b));
  for (std::size_t step = 1; step <= sim.steps; ++step) {
    st.step = step;
    if (step % sim.schedule.u) continue;
    ScoreSet g(banks.size());
    for (std::size_t l = 0; l < banks.size(); ++l)
      for (std::size_t r = 0; r < banks[l].size(); ++r)
        g[l].push_back(grow_scores(sim.grow, mags[l][r], sim.schedule.seed, l, r, st.updates + 1));
    const auto out = sparsity_step(st, banks, g);
    SparsityTrace::Update u;
    u.index = out.update_index;
    u.step = step;
    u.synced = out.synced;
    std::size_t pruned = 0, total = 0;
    for (std::size_t l = 0; l < st.masks.size(); ++l) {
      for (std::size_t r = 0; r < st.masks[l].size(); ++r) {
        const auto p = st.masks[l][r].pruned_count(), t = st.target_pruned[l][r];
        u.max_dev = std::max(u.max_dev, p > t ? p - t : t - p);
        if (!(st.masks[l][r] == st.masks[l][0])) u.branches_equal = false;
      }
      const auto m = merged_view(st.masks[l]);
      pruned += m.pruned_count();
      total += m.size();
    }
    u.sparsity = static_cast<double>(pruned) / static_cast<double>(total);
    tr.updates.push_back(u);
  }
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& layer : st.masks)
    for (const auto& m : layer) {
      const auto t = m.to_tensor();
      const auto* p = reinterpret_cast<const unsigned char*>(t.data().data());
      h = fnv1a(std::span<const unsigned char>(p, t.size() * sizeof(float)), h);
    }
  tr.digest = h;
  tr.final_masks = std::move(st.masks);
  return tr;
}

/// Sparsity dynamics checks on a shared-policy, gap-3 run.
inline std::vector<CheckResult> check_sparsity_dynamics(std::size_t steps, std::uint64_t seed, double time_limit = 10.0) {
  SparsitySimConfig sim;
  sim.steps = steps;
  sim.schedule.share_gap = 3;
  sim.schedule.seed = seed;
  SparsityTrace tr;
  std::vector<CheckResult> out;
  out.push_back(timed_check("sparsity_runtime", [&](CheckResult& r) {
    tr = simulate_sparsity(sim);
    r.cases = steps;
  }));
  out.back().tol = time_limit;
  out.back().max_diff = out.back().seconds;
  if (out.back().seconds >= time_limit) out.back().passed = false;
  out.push_back(timed_check("sparsity_within_one_filter", [&](CheckResult& r) {
    r.tol = 1;
    for (const auto& u : tr.updates) record(r, static_cast<double>(u.max_dev));
  }));
  out.push_back(timed_check("shared_masks_identical_after_sync", [&](CheckResult& r) {
    for (const auto& u : tr.updates)
      if (u.synced) {
        ++r.cases;
        if (!u.branches_equal) r.passed = false;
      }
  }));
  out.push_back(timed_check("gap3_sync_schedule", [&](CheckResult& r) {
    for (const auto& u : tr.updates) {
      ++r.cases;
      if (u.synced != (u.index % 3 == 0)) r.passed = false;
    }
  }));
  out.push_back(timed_check("sparsity_deterministic", [&](CheckResult& r) {
    auto short_sim = sim;
    short_sim.steps = std::min<std::size_t>(steps, 1000);
    const auto a = simulate_sparsity(short_sim), b = simulate_sparsity(short_sim);
    r.cases = 1;
    r.passed = a.digest == b.digest && a.updates.size() == b.updates.size();
  }));
  return out;
}

/// Variants against the oracle: f64 deterministic and f32 relaxed parallel.
inline std::vector<CheckResult> check_bench_oracle(const std::vector<SwConfig>& cfgs, std::size_t h, std::size_t w,
                                                   std::size_t threads) {
  std::vector<CheckResult> out;
  BenchOptions o;
  o.threads = threads;
  out.push_back(timed_check("bench_oracle_f64", [&](CheckResult& r) {
    r.tol = 1e-10;
    for (const auto& c : cfgs)
      for (const auto& row : verify_variants<double>(c, h, w, 1, o)) {
        record(r, row.max_abs_diff);
        if (!row.matches_fused) {
          r.passed = false;
          r.note = row.variant + " not bitwise equal to fused";
        }
      }
  }));
  o.relaxed = true;
  out.push_back(timed_check("bench_oracle_f32_relaxed", [&](CheckResult& r) {
    r.tol = 1e-5;
    for (const auto& c : cfgs)
      for (const auto& row : verify_variants<float>(c, h, w, 1, o)) record(r, row.max_abs_diff);
  }));
  return out;
}

/// Move bound, scratch ratio at G=0, E=1, and the desk-config timing ratio.
inline std::vector<CheckResult> check_bench_costs(std::size_t reps = 5) {
  std::vector<CheckResult> out;
  out.push_back(timed_check("fused_moves_le_2E_plus_1", [&](CheckResult& r) {
    const auto cfg = desk_config();
    r.tol = static_cast<double>(2 * cfg.E + 1);
    KernelStats st;
    (void)run_kernel(Variant::fused, make_bench_problem<float>(cfg, 56, 56, 1), BenchOptions{}, &st, true);
    record(r, st.moves_max);
  }));
  out.push_back(timed_check("peak_scratch_ratio_ge_g", [&](CheckResult& r) {
    auto cfg = desk_config();
    cfg.E = 1;
    const auto p = make_bench_problem<float>(cfg, 56, 56, 1);
    KernelStats a, b;
    (void)run_kernel(Variant::naive, p, BenchOptions{}, &a);
    (void)run_kernel(Variant::fused, p, BenchOptions{}, &b);
    const double ratio = static_cast<double>(a.peak_bytes) / static_cast<double>(b.peak_bytes);
    r.cases = 1;
    r.max_diff = ratio;
    r.tol = static_cast<double>(cfg.fanout());
    r.passed = ratio >= r.tol;
    r.note = "naive/fused peak = " + format_real(ratio);
  }));
  out.push_back(timed_check("fused_time_le_1.10_naive", [&](CheckResult& r) {
    const auto p = make_bench_problem<float>(desk_config(), 56, 56, 1);
    BenchOptions o;
    o.reps = reps;
    const double ratio = paired_time_ratio(Variant::naive, Variant::fused, p, o);
    r.cases = 1;
    r.max_diff = ratio;
    r.tol = 1.10;
    r.passed = ratio <= 1.10;
    r.note = "median paired fused/naive = " + format_real(ratio);
  }));
  return out;
}

inline std::string checks_csv(const std::vector<CheckResult>& rs) {
  CsvWriter csv({"check", "status", "cases", "max_diff", "tol", "note"});
  for (const auto& r : rs) {
    std::string note = r.note;
    std::replace(note.begin(), note.end(), ',', ';');
    std::replace(note.begin(), note.end(), '\n', ' ');
    csv.row({r.name, r.passed ? "PASS" : "FAIL", std::to_string(r.cases), format_real(r.max_diff),
             format_real(r.tol), note});
  }
  return csv.str();
}

}  // namespace swconv
