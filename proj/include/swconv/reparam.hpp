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

#include <cstddef>
#include <vector>

#include "swconv/shift_plan.hpp"
#include "swconv/sw_config.hpp"
#include "swconv/sw_op.hpp"
#include "swconv/sw_weights.hpp"
#include "swconv/tensor.hpp"

namespace swconv {

template <Real T>
struct FoldedConv {
  Tensor<T> weight;
  std::vector<T> bias;
};

/// Folds a per-output-channel affine norm into a conv whose filters are laid
/// out with the output channel outermost. An empty bias means zeros.
template <Real T>
FoldedConv<T> fold_norm(const Tensor<T>& w, const std::vector<T>& bias, const AffineNorm<T>& norm) {
  norm.validate();
  const std::size_t outs = w.extent(0);
  if (norm.channels() != outs)
    throw ShapeError("norm has " + std::to_string(norm.channels()) + " channels, filters have " + std::to_string(outs));
  if (!bias.empty() && bias.size() != outs) throw ShapeError("bias length does not match filter count");
  FoldedConv<T> f{w, std::vector<T>(outs)};
  const std::size_t per = w.size() / outs;
  for (std::size_t o = 0; o < outs; ++o) {
    const double s = norm.scale(o);
    for (std::size_t i = 0; i < per; ++i) f.weight[o * per + i] = static_cast<T>(static_cast<double>(w[o * per + i]) * s);
    const double b = bias.empty() ? 0.0 : static_cast<double>(bias[o]);
    f.bias[o] = static_cast<T>(static_cast<double>(norm.beta[o]) + (b - static_cast<double>(norm.mean[o])) * s);
  }
  return f;
}

/// Zeroes the masked filters of a (C, g, kh, kw) bank.
template <Real T>
Tensor<T> apply_mask(const Tensor<T>& bank, const FilterMask& mask) {
  if (bank.rank() != 4 || mask.channels() != bank.extent(0) || mask.fanout() != bank.extent(1))
    throw ShapeError("mask does not cover bank " + bank.shape().str());
  Tensor<T> out = bank;
  const std::size_t taps = bank.extent(2) * bank.extent(3);
  for (std::size_t f = 0; f < mask.size(); ++f)
    if (!mask.kept(f)) std::fill_n(out.data().begin() + static_cast<std::ptrdiff_t>(f * taps), taps, T{0});
  return out;
}

/// Elementwise sum of same-shape (already masked) filter banks.
template <Real T>
Tensor<T> merge_rep(const std::vector<Tensor<T>>& banks) {
  if (banks.empty()) throw ShapeError("merge_rep needs at least one bank");
  Tensor<T> out(banks.front().shape());
  for (const auto& b : banks) {
    if (!(b.shape() == out.shape())) throw ShapeError("rep bank shapes differ: " + b.shape().str() + " vs " + out.shape().str());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  }
  return out;
}

/// Per-channel dense kernel equivalent to an exact-mode operator.
/// Kernels are (C, 2*S_v+N, 2*S_h+N); ghost channels get a centred delta.
/// `bias` is all zero unless the norms were folded in.
template <Real T>
struct DenseKernel {
  Tensor<T> kernel;
  std::vector<T> bias;
  std::size_t reach_v = 0;  // S_v
  std::size_t reach_h = 0;  // S_h

  /// Same-conv parameters for applying `kernel` with groups = C.
  ConvParams conv_params() const {
    const std::size_t kh = kernel.extent(1), kw = kernel.extent(2);
    return {kh, kw, kh / 2, kw / 2, 1, kernel.extent(0)};
  }
};

namespace detail {

template <Real T>
DenseKernel<T> densify_impl(const SwWeights<T>& w, const ShiftPlan& plan, const SwConfig& cfg, bool fold) {
  cfg.validate();
  plan.check_matches(cfg);
  w.check_matches(cfg);
  const std::size_t n = cfg.N, g = cfg.fanout(), ghost = cfg.ghost_channels(), cs = cfg.sw_channels();
  DenseKernel<T> d;
  d.reach_v = cfg.has_branch(BranchType::vertical) ? plan.max_shift() : 0;
  d.reach_h = cfg.has_branch(BranchType::horizontal) ? plan.max_shift() : 0;
  const std::size_t kh = 2 * d.reach_v + n, kw = 2 * d.reach_h + n;
  std::vector<double> acc(cfg.C * kh * kw, 0.0);
  d.bias.assign(cfg.C, T{0});
  for (std::size_t c = 0; c < ghost; ++c) acc[(c * kh + kh / 2) * kw + kw / 2] = 1.0;

  const auto merged = merged_bank(w);
  const std::size_t taps = n * n;
  for (std::size_t c = 0; c < cs; ++c) {
    double* kc = acc.data() + (ghost + c) * kh * kw;
    double bias = 0.0;
    for (std::size_t t = 0; t < kBranchTypes; ++t) {
      const auto bt = static_cast<BranchType>(t);
      if (!cfg.has_branch(bt)) continue;
      const double scale = fold ? w.norm[t].scale(c) : 1.0;
      if (fold) bias += w.norm[t].shift(c);
      auto place = [&](std::span<const T> filt, Displacement dsp) {
        const auto r0 = static_cast<std::ptrdiff_t>(d.reach_v) + dsp.dy;
        const auto c0 = static_cast<std::ptrdiff_t>(d.reach_h) + dsp.dx;
        for (std::size_t u = 0; u < n; ++u)
          for (std::size_t v = 0; v < n; ++v)
            kc[static_cast<std::size_t>(r0 + static_cast<std::ptrdiff_t>(u)) * kw + static_cast<std::size_t>(c0 + static_cast<std::ptrdiff_t>(v))] +=
                scale * static_cast<double>(filt[u * n + v]);
      };
      for (std::size_t e = 0; e < cfg.E; ++e) {
        if (bt == BranchType::center) {
          if (cfg.center_mode == CenterMode::independent)
            place(w.center_bank->data().subspan(c * taps, taps), {});
          else
            place(merged.data().subspan((c * g + cfg.center_block()) * taps, taps), {});
          continue;
        }
        for (std::size_t k = 0; k < g; ++k)
          place(merged.data().subspan((c * g + k) * taps, taps), plan.displacement(bt, e, c, k));
      }
    }
    d.bias[ghost + c] = static_cast<T>(bias);
  }
  d.kernel = Tensor<T>(Shape{static_cast<std::int64_t>(cfg.C), static_cast<std::int64_t>(kh), static_cast<std::int64_t>(kw)});
  for (std::size_t i = 0; i < acc.size(); ++i) d.kernel[i] = static_cast<T>(acc[i]);
  return d;
}

}  // namespace detail

/// Dense equivalent of the exact-mode operator. Needs identity norms; call
/// densify_folded for operators with live norms.
template <Real T>
DenseKernel<T> densify(const SwWeights<T>& w, const ShiftPlan& plan, const SwConfig& cfg) {
  if (!w.norms_are_identity()) throw MustFoldError("densify needs identity norms; use densify_folded");
  return detail::densify_impl(w, plan, cfg, false);
}

/// As densify, with each branch type's norm folded into its taps and the
/// summed norm shifts returned as a per-channel bias.
template <Real T>
DenseKernel<T> densify_folded(const SwWeights<T>& w, const ShiftPlan& plan, const SwConfig& cfg) {
  return detail::densify_impl(w, plan, cfg, true);
}

/// Applies a dense kernel (depthwise same conv plus bias).
template <Real T>
Tensor<T> apply_dense(const Tensor<T>& x, const DenseKernel<T>& d, MacCounter* counter = nullptr) {
  const auto& k = d.kernel;
  Tensor<T> w4(Shape{static_cast<std::int64_t>(k.extent(0)), 1, static_cast<std::int64_t>(k.extent(1)),
                     static_cast<std::int64_t>(k.extent(2))},
               std::vector<T>(k.data().begin(), k.data().end()));
  auto y = conv2d_ref(x, w4, d.conv_params(), counter);
  const std::size_t ch = k.extent(0);
  const std::size_t plane = y.size() / (y.rank() == 4 ? y.extent(0) * ch : ch);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t c = (i / plane) % ch;
    if (d.bias[c] != T{0}) y[i] = static_cast<T>(static_cast<double>(y[i]) + static_cast<double>(d.bias[c]));
  }
  return y;
}

}  // namespace swconv
