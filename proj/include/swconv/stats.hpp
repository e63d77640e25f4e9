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
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "swconv/error.hpp"

namespace swconv {

inline double median(std::vector<double> v) {
  if (v.empty()) throw ConfigError("median of empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Median absolute deviation (unscaled).
inline double mad(const std::vector<double>& v) {
  const double m = median(v);
  std::vector<double> d(v.size());
  std::transform(v.begin(), v.end(), d.begin(), [m](double x) { return std::fabs(x - m); });
  return median(std::move(d));
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw ConfigError("mean of empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct WilcoxonResult {
  std::size_t n = 0;        // non-zero differences used
  double w_plus = 0.0;      // sum of ranks of positive differences
  double p_value = 1.0;     // one-sided, H1: differences tend to be positive
};

/// Exact one-sided Wilcoxon signed-rank test on paired differences.
/// Zero differences are dropped; tied magnitudes get average ranks.
inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs) {
  std::vector<double> d;
  for (double x : diffs)
    if (x != 0.0) d.push_back(x);
  WilcoxonResult r;
  r.n = d.size();
  if (d.empty()) return r;

  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return std::fabs(d[a]) < std::fabs(d[b]); });
  // Doubled ranks keep averages integral.
  std::vector<std::size_t> rank2(d.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && std::fabs(d[idx[j + 1]]) == std::fabs(d[idx[i]])) ++j;
    for (std::size_t t = i; t <= j; ++t) rank2[idx[t]] = i + j + 2;
    i = j + 1;
  }
  std::size_t observed2 = 0, total2 = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    total2 += rank2[i];
    if (d[i] > 0) observed2 += rank2[i];
  }
  r.w_plus = static_cast<double>(observed2) / 2.0;

  // ways[s]: number of sign assignments with positive doubled-rank sum s.
  std::vector<double> ways(total2 + 1, 0.0);
  ways[0] = 1.0;
  for (auto rk : rank2)
    for (std::size_t s = total2; s >= rk; --s) {
      ways[s] += ways[s - rk];
      if (s == rk) break;
    }
  double tail = 0.0;
  for (std::size_t s = observed2; s <= total2; ++s) tail += ways[s];
  r.p_value = tail / std::ldexp(1.0, static_cast<int>(d.size()));
  return r;
}

}  // namespace swconv
