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

// Coarse-grained filter masks over SW fan-out banks: magnitude_sum scoring,
// prune-and-grow updates, mask sharing across rep branches, and analytics
// over trained or simulated masks.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <string>
#include <vector>

#include "swconv/arch.hpp"
#include "swconv/reparam.hpp"
#include "swconv/rng.hpp"
#include "swconv/sw_weights.hpp"

namespace swconv {

/// score(c,k) = sum |w[c][k][u,v]|, shaped (C, g).
template <Real T>
Tensor<double> score_filters(const Tensor<T>& bank) {
  if (bank.rank() != 4) throw ShapeError("filter bank must be (C, g, kh, kw), got " + bank.shape().str());
  const std::size_t c = bank.extent(0), g = bank.extent(1), taps = bank.extent(2) * bank.extent(3);
  Tensor<double> s(Shape{static_cast<std::int64_t>(c), static_cast<std::int64_t>(g)});
  for (std::size_t f = 0; f < c * g; ++f) {
    double acc = 0.0;
    for (std::size_t t = 0; t < taps; ++t) acc += std::fabs(static_cast<double>(bank[f * taps + t]));
    s[f] = acc;
  }
  return s;
}

namespace detail {

inline void check_scores(const Tensor<double>& s, const FilterMask& m) {
  if (s.rank() != 2 || s.extent(0) != m.channels() || s.extent(1) != m.fanout())
    throw ShapeError("scores " + s.shape().str() + " do not match mask");
}

// Indices satisfying `pick`, ordered by score ascending (or descending), ties by index.
template <typename Pred>
std::vector<std::size_t> ranked(const Tensor<double>& s, Pred pick, bool descending) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (pick(i)) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? s[a] > s[b] : s[a] < s[b];
  });
  return idx;
}

}  // namespace detail

/// Masks the `count` lowest-scoring kept filters of `mask`.
inline FilterMask prune_lowest(const Tensor<double>& scores, FilterMask mask, std::size_t count) {
  detail::check_scores(scores, mask);
  const auto order = detail::ranked(scores, [&](std::size_t i) { return mask.kept(i); }, false);
  for (std::size_t i = 0; i < std::min(count, order.size()); ++i) mask.set(order[i], false);
  return mask;
}

/// Exactly floor(s*n) lowest-scoring filters masked; ties by ascending index.
inline FilterMask prune_to_target(const Tensor<double>& scores, double s) {
  if (!(s >= 0.0 && s < 1.0)) throw ConfigError("target sparsity must lie in [0,1)");
  if (scores.rank() != 2) throw ShapeError("scores must be (C, g)");
  const FilterMask dense(scores.extent(0), scores.extent(1), true);
  return prune_lowest(scores, dense, static_cast<std::size_t>(std::floor(s * static_cast<double>(scores.size()))));
}

struct GrowResult {
  FilterMask mask;
  std::size_t grown = 0;
  bool clipped = false;  // count exceeded the number of masked filters
};

/// Unmasks the `count` masked filters with the highest grow scores.
inline GrowResult grow_filters(const FilterMask& mask, const Tensor<double>& grow_scores, std::size_t count) {
  detail::check_scores(grow_scores, mask);
  const auto order = detail::ranked(grow_scores, [&](std::size_t i) { return !mask.kept(i); }, true);
  GrowResult r{mask, std::min(count, order.size()), count > order.size()};
  for (std::size_t i = 0; i < r.grown; ++i) r.mask.set(order[i], true);
  return r;
}

/// Brings `mask` to exactly `pruned` masked filters: extra filters are pruned
/// by magnitude, missing ones regrown by grow score.
inline FilterMask renormalize(FilterMask mask, std::size_t pruned, const Tensor<double>& magnitude,
                              const Tensor<double>& grow) {
  const std::size_t now = mask.pruned_count();
  if (now < pruned) return prune_lowest(magnitude, std::move(mask), pruned - now);
  if (now > pruned) return grow_filters(mask, grow, now - pruned).mask;
  return mask;
}

enum class MaskPolicy : std::uint8_t { shared, branch_mean_init, subset };
enum class InitPolicy : std::uint8_t { uniform, sum_then_prune, branch_mean_init, subset };

inline const char* to_string(MaskPolicy p) {
  switch (p) {
    case MaskPolicy::shared: return "shared";
    case MaskPolicy::branch_mean_init: return "branch_mean_init";
    case MaskPolicy::subset: return "subset";
  }
  return "?";
}
inline const char* to_string(InitPolicy p) {
  switch (p) {
    case InitPolicy::uniform: return "uniform";
    case InitPolicy::sum_then_prune: return "sum_then_prune";
    case InitPolicy::branch_mean_init: return "branch_mean_init";
    case InitPolicy::subset: return "subset";
  }
  return "?";
}
inline MaskPolicy parse_mask_policy(const std::string& s) {
  if (s == "shared") return MaskPolicy::shared;
  if (s == "branch_mean_init") return MaskPolicy::branch_mean_init;
  if (s == "subset") return MaskPolicy::subset;
  throw ConfigError("unknown mask policy '" + s + "'");
}
inline InitPolicy parse_init_policy(const std::string& s) {
  if (s == "uniform") return InitPolicy::uniform;
  if (s == "sum_then_prune") return InitPolicy::sum_then_prune;
  if (s == "branch_mean_init") return InitPolicy::branch_mean_init;
  if (s == "subset") return InitPolicy::subset;
  throw ConfigError("unknown init policy '" + s + "'");
}

/// masks[layer][branch].
using MaskSet = std::vector<std::vector<FilterMask>>;
template <Real T>
using BankSet = std::vector<std::vector<Tensor<T>>>;
using ScoreSet = std::vector<std::vector<Tensor<double>>>;

namespace detail {

// Branch r > 0 keeps a random ceil((1-s) * kept) subset of branch r-1's
// kept filters, so sparsity rises with r and s = 0 stays dense.
inline void nest_subsets(std::vector<FilterMask>& masks, double s, std::uint64_t seed, std::uint64_t layer,
                         std::uint64_t epoch) {
  const std::size_t b = masks.size();
  for (std::size_t r = 1; r < b; ++r) {
    std::vector<std::size_t> prev;
    for (std::size_t i = 0; i < masks[r - 1].size(); ++i)
      if (masks[r - 1].kept(i)) prev.push_back(i);
    const auto perm = CounterRng({seed, layer, epoch, r, 0x5542ull}).permutation(prev.size());
    FilterMask m(masks[0].channels(), masks[0].fanout(), false);
    const auto keep = static_cast<std::size_t>(std::ceil((1.0 - s) * static_cast<double>(prev.size()) - 1e-9));
    for (std::size_t i = 0; i < keep; ++i) m.set(prev[perm[i]], true);
    masks[r] = std::move(m);
  }
}

// One mask for all branches: union of kept filters first, ranked by summed
// magnitude, then the rest; keeps n - pruned.
inline FilterMask unify(const std::vector<FilterMask>& masks, const std::vector<Tensor<double>>& scores,
                        std::size_t pruned) {
  Tensor<double> joint(scores[0].shape());
  for (const auto& s : scores)
    for (std::size_t i = 0; i < joint.size(); ++i) joint[i] += s[i];
  std::vector<std::uint8_t> in_union(joint.size(), 0);
  for (const auto& m : masks)
    for (std::size_t i = 0; i < m.size(); ++i) in_union[i] |= m.kept(i) ? 1 : 0;
  auto first = ranked(joint, [&](std::size_t i) { return in_union[i] != 0; }, true);
  const auto rest = ranked(joint, [&](std::size_t i) { return in_union[i] == 0; }, true);
  first.insert(first.end(), rest.begin(), rest.end());
  FilterMask out(masks[0].channels(), masks[0].fanout(), false);
  for (std::size_t i = 0; i < joint.size() - pruned; ++i) out.set(first[i], true);
  return out;
}

// Global ranking across layers: pruned count per layer when the lowest
// floor(s * total) filters of the concatenated scores are removed.
inline std::vector<std::size_t> global_prune_counts(const std::vector<Tensor<double>>& per_layer, double s) {
  struct Item {
    double score;
    std::size_t layer;
    std::size_t index;
  };
  std::vector<Item> all;
  for (std::size_t l = 0; l < per_layer.size(); ++l)
    for (std::size_t i = 0; i < per_layer[l].size(); ++i) all.push_back({per_layer[l][i], l, i});
  std::stable_sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  const auto total = static_cast<std::size_t>(std::floor(s * static_cast<double>(all.size())));
  std::vector<std::size_t> counts(per_layer.size(), 0);
  for (std::size_t i = 0; i < total; ++i) ++counts[all[i].layer];
  return counts;
}

template <Real T>
void check_banks(const BankSet<T>& banks) {
  if (banks.empty() || banks[0].empty()) throw ShapeError("no banks");
  for (const auto& layer : banks) {
    if (layer.size() != banks[0].size()) throw ShapeError("branch count differs across layers");
    for (const auto& b : layer)
      if (!(b.shape() == layer[0].shape())) throw ShapeError("bank shapes differ within a layer");
  }
}

}  // namespace detail

/// Initial masks per layer and branch.
///   uniform:          every (layer, branch) pruned to s by its own scores.
///   sum_then_prune:   branch weights added per layer, ranked globally across
///                     layers; all branches share the layer mask.
///   branch_mean_init: each branch ranked globally on its own; the per-layer
///                     pruned counts are averaged over branches and each branch
///                     pruned to that count by its own scores.
///   subset:           sum_then_prune for branch 0, nested random subsets after.
template <Real T>
MaskSet init_sparsity(InitPolicy policy, const BankSet<T>& banks, double s, std::uint64_t seed = kDefaultSeed) {
  if (!(s >= 0.0 && s < 1.0)) throw ConfigError("target sparsity must lie in [0,1)");
  detail::check_banks(banks);
  const std::size_t layers = banks.size(), b = banks[0].size();
  MaskSet out(layers);
  switch (policy) {
    case InitPolicy::uniform:
      for (std::size_t l = 0; l < layers; ++l)
        for (std::size_t r = 0; r < b; ++r) out[l].push_back(prune_to_target(score_filters(banks[l][r]), s));
      return out;
    case InitPolicy::sum_then_prune:
    case InitPolicy::subset: {
      std::vector<Tensor<double>> joint;
      for (const auto& layer : banks) joint.push_back(score_filters(merge_rep(layer)));
      const auto counts = detail::global_prune_counts(joint, s);
      for (std::size_t l = 0; l < layers; ++l) {
        const FilterMask dense(joint[l].extent(0), joint[l].extent(1), true);
        out[l].assign(b, prune_lowest(joint[l], dense, counts[l]));
        if (policy == InitPolicy::subset) detail::nest_subsets(out[l], s, seed, l, 0);
      }
      return out;
    }
    case InitPolicy::branch_mean_init: {
      std::vector<std::vector<Tensor<double>>> scores(layers);
      for (std::size_t l = 0; l < layers; ++l)
        for (std::size_t r = 0; r < b; ++r) scores[l].push_back(score_filters(banks[l][r]));
      std::vector<std::size_t> sum(layers, 0);
      for (std::size_t r = 0; r < b; ++r) {
        std::vector<Tensor<double>> col;
        for (std::size_t l = 0; l < layers; ++l) col.push_back(scores[l][r]);
        const auto counts = detail::global_prune_counts(col, s);
        for (std::size_t l = 0; l < layers; ++l) sum[l] += counts[l];
      }
      for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t avg = (2 * sum[l] + b) / (2 * b);  // round half up
        for (std::size_t r = 0; r < b; ++r) {
          const FilterMask dense(scores[l][r].extent(0), scores[l][r].extent(1), true);
          out[l].push_back(prune_lowest(scores[l][r], dense, avg));
        }
      }
      return out;
    }
  }
  throw ConfigError("unknown init policy");
}

struct SparsitySchedule {
  double s = 0.4;
  std::size_t u = 100;          // steps between updates
  std::size_t share_gap = 1;    // updates between mask synchronizations
  MaskPolicy policy = MaskPolicy::shared;
  double pf_start = 0.5;        // prune fraction, cosine-annealed
  double pf_end = 0.0;
  std::size_t horizon = 10000;  // steps over which pf anneals
  std::uint64_t seed = kDefaultSeed;

  void validate() const {
    if (!(s >= 0.0 && s < 1.0)) throw ConfigError("s must lie in [0,1)");
    if (u == 0 || share_gap == 0 || horizon == 0) throw ConfigError("u, share_gap and horizon must be positive");
    if (!(pf_start >= 0.0 && pf_start <= 1.0 && pf_end >= 0.0 && pf_end <= 1.0))
      throw ConfigError("prune fractions must lie in [0,1]");
  }
};

/// Cosine decay from pf_start at step 0 to pf_end at the horizon.
inline double prune_fraction(const SparsitySchedule& sc, std::size_t step) {
  const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(sc.horizon));
  return sc.pf_end + (sc.pf_start - sc.pf_end) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

struct SparsityState {
  SparsitySchedule schedule;
  MaskSet masks;
  std::vector<std::vector<std::size_t>> target_pruned;  // per layer and branch
  std::size_t step = 0;                                 // advanced by the caller
  std::size_t updates = 0;
};

/// State whose per-(layer, branch) targets are the pruned counts of `masks`.
inline SparsityState make_sparsity_state(const SparsitySchedule& sc, MaskSet masks) {
  sc.validate();
  SparsityState st{sc, std::move(masks), {}, 0, 0};
  for (const auto& layer : st.masks) {
    st.target_pruned.emplace_back();
    for (const auto& m : layer) st.target_pruned.back().push_back(m.pruned_count());
  }
  return st;
}

struct StepOutcome {
  bool updated = false;
  bool synced = false;
  std::size_t update_index = 0;  // 1-based when updated
};

/// One simulated iteration. Nothing happens unless step is a positive
/// multiple of u. An update prunes floor(pf * kept) lowest-magnitude filters,
/// regrows as many by grow score, and restores each target count. Every
/// share_gap-th update synchronizes branches per the policy.
template <Real T>
StepOutcome sparsity_step(SparsityState& st, const BankSet<T>& banks, const ScoreSet& grow) {
  const auto& sc = st.schedule;
  if (st.step == 0 || st.step % sc.u != 0) return {};
  detail::check_banks(banks);
  if (banks.size() != st.masks.size() || grow.size() != banks.size())
    throw ShapeError("banks, scores and masks disagree on layer count");
  StepOutcome out{true, false, ++st.updates};
  const double pf = prune_fraction(sc, st.step);
  const bool sync = out.update_index % sc.share_gap == 0;

  for (std::size_t l = 0; l < banks.size(); ++l) {
    const std::size_t b = banks[l].size();
    if (st.masks[l].size() != b || grow[l].size() != b) throw ShapeError("branch count mismatch in layer " + std::to_string(l));
    std::vector<Tensor<double>> mag;
    for (std::size_t r = 0; r < b; ++r) {
      mag.push_back(score_filters(banks[l][r]));
      auto& m = st.masks[l][r];
      detail::check_scores(mag[r], m);
      detail::check_scores(grow[l][r], m);
      const std::size_t kept = m.size() - st.target_pruned[l][r];
      const auto p = static_cast<std::size_t>(std::floor(pf * static_cast<double>(kept)));
      m = prune_lowest(mag[r], m, p);
      m = grow_filters(m, grow[l][r], p).mask;
      m = renormalize(std::move(m), st.target_pruned[l][r], mag[r], grow[l][r]);
    }
    if (!sync || b < 2) continue;
    const auto unified = detail::unify(st.masks[l], mag, st.target_pruned[l][0]);
    for (std::size_t r = 0; r < b; ++r) st.masks[l][r] = unified;
    if (sc.policy == MaskPolicy::subset) {
      detail::nest_subsets(st.masks[l], sc.s, sc.seed, l, out.update_index);
      for (std::size_t r = 1; r < b; ++r) st.target_pruned[l][r] = st.masks[l][r].pruned_count();
    }
  }
  out.synced = sync;
  return out;
}

// ---------------------------------------------------------------------------
// Injected grow-score streams.

enum class GrowStream : std::uint8_t { uniform, adversarial, persistent };

inline GrowStream parse_grow_stream(const std::string& s) {
  if (s == "uniform") return GrowStream::uniform;
  if (s == "adversarial") return GrowStream::adversarial;
  if (s == "persistent") return GrowStream::persistent;
  throw ConfigError("unknown grow stream '" + s + "'");
}
inline const char* to_string(GrowStream g) {
  switch (g) {
    case GrowStream::uniform: return "uniform";
    case GrowStream::adversarial: return "adversarial";
    case GrowStream::persistent: return "persistent";
  }
  return "?";
}

/// uniform: fresh draws per update. persistent: one fixed draw per filter.
/// adversarial: negated magnitude, so the weakest filters regrow first.
inline Tensor<double> grow_scores(GrowStream kind, const Tensor<double>& magnitude, std::uint64_t seed,
                                  std::uint64_t layer, std::uint64_t branch, std::uint64_t update) {
  Tensor<double> g(magnitude.shape());
  if (kind == GrowStream::adversarial) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = -magnitude[i];
    return g;
  }
  CounterRng rng({seed, layer, branch, kind == GrowStream::uniform ? update : 0, 0x47524f57ull});
  for (auto& v : g.data()) v = rng.uniform01();
  return g;
}

// ---------------------------------------------------------------------------
// Analytics. A filter counts as pruned when every branch masks it (the
// merged inference view).

struct MaskStats {
  struct LayerRow {
    std::size_t layer, stage;
    double sparsity;
  };
  struct IndexRow {
    std::size_t stage, k;
    double pruned_fraction;
  };
  struct HistRow {
    std::size_t stage, pruned_count;
    double group_fraction;
  };
  std::vector<LayerRow> layers;
  std::vector<IndexRow> per_index;
  std::vector<HistRow> histogram;
  std::array<double, 4> baseline{};          // 1/g per stage
  std::array<double, 4> all_pruned_groups{};  // groups with every filter pruned
};

inline FilterMask merged_view(const std::vector<FilterMask>& branches) {
  if (branches.empty()) throw ShapeError("layer has no masks");
  FilterMask m(branches[0].channels(), branches[0].fanout(), false);
  for (const auto& b : branches) {
    if (b.channels() != m.channels() || b.fanout() != m.fanout()) throw ShapeError("branch masks differ in shape");
    for (std::size_t i = 0; i < b.size(); ++i)
      if (b.kept(i)) m.set(i, true);
  }
  return m;
}

inline MaskStats mask_stats(const MaskSet& masks, const ArchSpec& arch) {
  if (masks.size() != arch.layers())
    throw ShapeError("masks cover " + std::to_string(masks.size()) + " layers, arch has " + std::to_string(arch.layers()));
  MaskStats st;
  const auto fan = stage_fanouts(arch);
  std::array<std::vector<std::size_t>, 4> idx_pruned, hist;
  std::array<std::size_t, 4> groups{};
  for (std::size_t s = 0; s < 4; ++s) {
    idx_pruned[s].assign(fan[s], 0);
    hist[s].assign(fan[s] + 1, 0);
    st.baseline[s] = 1.0 / static_cast<double>(fan[s]);
  }
  for (std::size_t l = 0; l < masks.size(); ++l) {
    const auto cfg = arch.layer_config(l);
    const auto s = arch.stage_of(l);
    const auto m = merged_view(masks[l]);
    if (m.channels() != cfg.sw_channels() || m.fanout() != cfg.fanout())
      throw ShapeError("mask of layer " + std::to_string(l) + " does not match its operator");
    st.layers.push_back({l, s, m.sparsity()});
    for (std::size_t c = 0; c < m.channels(); ++c) {
      std::size_t pc = 0;
      for (std::size_t k = 0; k < m.fanout(); ++k)
        if (!m.kept(c, k)) {
          ++idx_pruned[s][k];
          ++pc;
        }
      ++hist[s][pc];
      ++groups[s];
    }
  }
  for (std::size_t s = 0; s < 4; ++s) {
    const auto n = static_cast<double>(groups[s]);
    for (std::size_t k = 0; k < fan[s]; ++k) st.per_index.push_back({s, k, static_cast<double>(idx_pruned[s][k]) / n});
    for (std::size_t p = 0; p <= fan[s]; ++p) st.histogram.push_back({s, p, static_cast<double>(hist[s][p]) / n});
    st.all_pruned_groups[s] = static_cast<double>(hist[s][fan[s]]) / n;
  }
  return st;
}

/// Random banks matching every SW layer of `arch`, [layer][branch].
template <Real T>
BankSet<T> arch_banks(const ArchSpec& arch, std::uint64_t seed) {
  BankSet<T> out;
  for (std::size_t l = 0; l < arch.layers(); ++l) out.push_back(random_sw_weights<T>(arch.layer_config(l), seed).rep);
  return out;
}

}  // namespace swconv
