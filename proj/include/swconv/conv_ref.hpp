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

// Slow, obviously-correct convolutions. Everything else in the library is
// checked against these.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>

#include "swconv/tensor.hpp"

namespace swconv {

/// Geometry of a 2-D cross-correlation. Only strides 1 and 2 are supported.
struct ConvParams {
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
  std::size_t stride = 1;
  std::size_t groups = 1;
};

/// Per-side zero padding; lets callers build the asymmetric working grids
/// some pad modes need.
struct Padding {
  std::size_t top = 0;
  std::size_t bottom = 0;
  std::size_t left = 0;
  std::size_t right = 0;

  static Padding same(std::size_t kh, std::size_t kw) { return {kh / 2, kh / 2, kw / 2, kw / 2}; }
};

/// Multiply-accumulate tally. Counts every kernel tap at every output position,
/// including taps that land on zero padding (the usual sliding-window count).
struct MacCounter {
  std::uint64_t macs = 0;
};

namespace detail {

inline std::size_t conv_out_extent(std::size_t in, std::size_t pad_before, std::size_t pad_after,
                                   std::size_t k, std::size_t stride) {
  const std::size_t padded = in + pad_before + pad_after;
  if (padded < k) throw ShapeError("kernel larger than padded input");
  return (padded - k) / stride + 1;
}

template <Real T>
void conv2d_single(std::span<const T> x, std::size_t channels, std::size_t h, std::size_t w,
                   const Tensor<T>& wt, const ConvParams& p, std::size_t out_h, std::size_t out_w,
                   std::span<T> y) {
  const std::size_t out_ch = wt.extent(0);
  const std::size_t cin_g = channels / p.groups;
  const std::size_t cout_g = out_ch / p.groups;
  const auto wd = wt.data();
  for (std::size_t o = 0; o < out_ch; ++o) {
    const std::size_t grp = o / cout_g;
    for (std::size_t i = 0; i < out_h; ++i) {
      for (std::size_t j = 0; j < out_w; ++j) {
        Accum acc = 0;
        for (std::size_t u = 0; u < p.kernel_h; ++u) {
          const auto yy = static_cast<std::ptrdiff_t>(i * p.stride + u) - static_cast<std::ptrdiff_t>(p.pad_h);
          if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t v = 0; v < p.kernel_w; ++v) {
            const auto xx = static_cast<std::ptrdiff_t>(j * p.stride + v) - static_cast<std::ptrdiff_t>(p.pad_w);
            if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(w)) continue;
            for (std::size_t c = 0; c < cin_g; ++c) {
              const std::size_t ci = grp * cin_g + c;
              acc += static_cast<Accum>(wd[((o * cin_g + c) * p.kernel_h + u) * p.kernel_w + v]) *
                     static_cast<Accum>(x[(ci * h + static_cast<std::size_t>(yy)) * w + static_cast<std::size_t>(xx)]);
            }
          }
        }
        y[(o * out_h + i) * out_w + j] = static_cast<T>(acc);
      }
    }
  }
}

}  // namespace detail

/// y[o,i,j] = sum_{c,u,v} w[o,c,u,v] * x[c, i*s+u-pad_h, j*s+v-pad_w], x zero
/// extended. Accepts (C,H,W) or (B,C,H,W) input; weights are (O, C/groups, kh, kw).
template <Real T>
Tensor<T> conv2d_ref(const Tensor<T>& x, const Tensor<T>& w, const ConvParams& p,
                     MacCounter* counter = nullptr) {
  if (p.stride != 1 && p.stride != 2) throw ConfigError("stride must be 1 or 2");
  if (p.groups == 0 || p.kernel_h == 0 || p.kernel_w == 0) throw ConfigError("zero kernel or groups");
  if (x.rank() != 3 && x.rank() != 4) throw ShapeError("conv2d_ref input must be rank 3 or 4");
  if (w.rank() != 4) throw ShapeError("conv2d_ref weights must be rank 4");
  const bool batched = x.rank() == 4;
  const std::size_t batch = batched ? x.extent(0) : 1;
  const std::size_t c = x.extent(batched ? 1 : 0);
  const std::size_t h = x.extent(batched ? 2 : 1);
  const std::size_t wd = x.extent(batched ? 3 : 2);
  const std::size_t out_ch = w.extent(0);
  if (c % p.groups != 0) throw ShapeError("channels not divisible by groups");
  if (out_ch % p.groups != 0) throw ShapeError("output channels not divisible by groups");
  if (w.extent(1) != c / p.groups || w.extent(2) != p.kernel_h || w.extent(3) != p.kernel_w)
    throw ShapeError("weights " + w.shape().str() + " incompatible with input " + x.shape().str());
  const std::size_t oh = detail::conv_out_extent(h, p.pad_h, p.pad_h, p.kernel_h, p.stride);
  const std::size_t ow = detail::conv_out_extent(wd, p.pad_w, p.pad_w, p.kernel_w, p.stride);

  Tensor<T> y = batched ? Tensor<T>(Shape{static_cast<std::int64_t>(batch), static_cast<std::int64_t>(out_ch),
                                          static_cast<std::int64_t>(oh), static_cast<std::int64_t>(ow)})
                        : Tensor<T>(Shape{static_cast<std::int64_t>(out_ch), static_cast<std::int64_t>(oh),
                                          static_cast<std::int64_t>(ow)});
  const std::size_t in_step = c * h * wd;
  const std::size_t out_step = out_ch * oh * ow;
  for (std::size_t b = 0; b < batch; ++b) {
    detail::conv2d_single<T>(x.data().subspan(b * in_step, in_step), c, h, wd, w, p, oh, ow,
                             y.data().subspan(b * out_step, out_step));
  }
  if (counter) counter->macs += batch * out_step * p.kernel_h * p.kernel_w * (c / p.groups);
  return y;
}

/// One output value of a zero-extended depthwise correlation at grid (r, c).
/// Accumulates u then v ascending in Accum precision.
template <Real T>
inline T correlate_at(std::span<const T> x, std::size_t h, std::size_t w, std::span<const T> kernel, std::size_t kh,
                      std::size_t kw, std::size_t pad_h, std::size_t pad_w, std::ptrdiff_t r, std::ptrdiff_t c) {
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  Accum acc = 0;
  for (std::size_t u = 0; u < kh; ++u) {
    const std::ptrdiff_t yy = r + static_cast<std::ptrdiff_t>(u) - static_cast<std::ptrdiff_t>(pad_h);
    if (yy < 0 || yy >= H) continue;
    for (std::size_t v = 0; v < kw; ++v) {
      const std::ptrdiff_t xx = c + static_cast<std::ptrdiff_t>(v) - static_cast<std::ptrdiff_t>(pad_w);
      if (xx < 0 || xx >= W) continue;
      acc += static_cast<Accum>(kernel[u * kw + v]) *
             static_cast<Accum>(x[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)]);
    }
  }
  return static_cast<T>(acc);
}

/// correlate_at for grid columns [c0, c0 + n) of row r, written to out[0..n).
/// Same tap order and accumulator, so results are bit-identical; columns whose
/// taps are all in range skip the bounds tests.
template <Real T>
inline void correlate_row(std::span<const T> x, std::size_t h, std::size_t w, std::span<const T> kernel,
                          std::size_t kh, std::size_t kw, std::size_t pad_h, std::size_t pad_w, std::ptrdiff_t r,
                          std::ptrdiff_t c0, std::size_t n, T* out) {
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  const auto pw = static_cast<std::ptrdiff_t>(pad_w);
  const auto KW = static_cast<std::ptrdiff_t>(kw);
  const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(c0, pw);          // first column with xx >= 0 for v = 0
  const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(c0 + static_cast<std::ptrdiff_t>(n), W - KW + 1 + pw);
  std::size_t u0 = 0, u1 = kh;
  while (u0 < kh && r + static_cast<std::ptrdiff_t>(u0) - static_cast<std::ptrdiff_t>(pad_h) < 0) ++u0;
  while (u1 > u0 && r + static_cast<std::ptrdiff_t>(u1 - 1) - static_cast<std::ptrdiff_t>(pad_h) >= H) --u1;
  for (std::ptrdiff_t c = c0; c < c0 + static_cast<std::ptrdiff_t>(n); ++c) {
    if (c < lo || c >= hi) {
      out[c - c0] = correlate_at(x, h, w, kernel, kh, kw, pad_h, pad_w, r, c);
      continue;
    }
    Accum acc = 0;
    for (std::size_t u = u0; u < u1; ++u) {
      const T* xr = x.data() + static_cast<std::size_t>(r + static_cast<std::ptrdiff_t>(u) - static_cast<std::ptrdiff_t>(pad_h)) * w +
                    static_cast<std::size_t>(c - pw);
      const T* kr = kernel.data() + u * kw;
      for (std::size_t v = 0; v < kw; ++v) acc += static_cast<Accum>(kr[v]) * static_cast<Accum>(xr[v]);
    }
    out[c - c0] = static_cast<T>(acc);
  }
}

/// Depthwise correlation of one spatial map with one kernel, evaluated on the
/// grid region of `out` (which may extend past the input). `x` is H x W and
/// zero extended; the kernel is anchored by `pad` (offset of tap (0,0)).
template <Real T>
void correlate_plane(std::span<const T> x, std::size_t h, std::size_t w, std::span<const T> kernel,
                     std::size_t kh, std::size_t kw, std::size_t pad_h, std::size_t pad_w, Plane<T>& out,
                     MacCounter* counter = nullptr) {
  for (std::ptrdiff_t r = out.row0(); r < out.row_end(); ++r)
    for (std::ptrdiff_t c = out.col0(); c < out.col_end(); ++c)
      out(r, c) = correlate_at(x, h, w, kernel, kh, kw, pad_h, pad_w, r, c);
  if (counter) counter->macs += out.rows() * out.cols() * kh * kw;
}

/// Depthwise "same" convolution with a per-channel M x N kernel, K shaped
/// (C, M, N). Pads default to (M//2, N//2) and are required for even sides.
template <Real T>
Tensor<T> strip_conv_ref(const Tensor<T>& x, const Tensor<T>& k,
                         std::optional<std::pair<std::size_t, std::size_t>> pads = std::nullopt,
                         MacCounter* counter = nullptr) {
  if (x.rank() != 3) throw ShapeError("strip_conv_ref input must be (C,H,W)");
  if (k.rank() != 3) throw ShapeError("strip kernel must be (C,M,N)");
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t m = k.extent(1), n = k.extent(2);
  if (k.extent(0) != c) throw ShapeError("strip kernel channel count mismatch");
  if (!pads && (m % 2 == 0 || n % 2 == 0))
    throw ConfigError("even kernel side needs explicit pads (centre is ambiguous)");
  const auto [ph, pw] = pads.value_or(std::pair{m / 2, n / 2});
  if (detail::conv_out_extent(h, ph, ph, m, 1) != h || detail::conv_out_extent(w, pw, pw, n, 1) != w)
    throw ShapeError("pads do not preserve the spatial size");
  Tensor<T> y(x.shape());
  const std::size_t plane = m * n;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const auto xs = x.channel(ch);
    const auto ks = k.data().subspan(ch * plane, plane);
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        Accum acc = 0;
        for (std::size_t u = 0; u < m; ++u) {
          const auto yy = static_cast<std::ptrdiff_t>(i + u) - static_cast<std::ptrdiff_t>(ph);
          if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t v = 0; v < n; ++v) {
            const auto xx = static_cast<std::ptrdiff_t>(j + v) - static_cast<std::ptrdiff_t>(pw);
            if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(w)) continue;
            acc += static_cast<Accum>(ks[u * n + v]) *
                   static_cast<Accum>(xs[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)]);
          }
        }
        y.at(ch, i, j) = static_cast<T>(acc);
      }
    }
  }
  if (counter) counter->macs += c * h * w * m * n;
  return y;
}

/// One-input-to-many-outputs grouped convolution. `bank` is (C, g, kh, kw);
/// output channel c*g+k is x[c] correlated with bank[c][k]. Padding may be
/// asymmetric, which is how the enlarged working grids are produced.
template <Real T>
Tensor<T> fanout_conv(const Tensor<T>& x, const Tensor<T>& bank, const Padding& pad,
                      MacCounter* counter = nullptr) {
  if (x.rank() != 3) throw ShapeError("fanout_conv input must be (C,H,W)");
  if (bank.rank() != 4) throw ShapeError("fan-out bank must be (C,g,kh,kw)");
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t g = bank.extent(1), kh = bank.extent(2), kw = bank.extent(3);
  if (bank.extent(0) != c) throw ShapeError("fan-out bank has " + std::to_string(bank.extent(0)) +
                                            " groups for " + std::to_string(c) + " channels");
  if (g > std::numeric_limits<std::int64_t>::max() / c) throw ShapeError("C*g overflows");
  const std::size_t oh = detail::conv_out_extent(h, pad.top, pad.bottom, kh, 1);
  const std::size_t ow = detail::conv_out_extent(w, pad.left, pad.right, kw, 1);
  Tensor<T> y(Shape{static_cast<std::int64_t>(c * g), static_cast<std::int64_t>(oh), static_cast<std::int64_t>(ow)});
  Plane<T> scratch(0, 0, oh, ow);
  const std::size_t taps = kh * kw;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t k = 0; k < g; ++k) {
      correlate_plane<T>(x.channel(ch), h, w, bank.data().subspan((ch * g + k) * taps, taps), kh, kw, pad.top,
                         pad.left, scratch, counter);
      auto dst = y.channel(ch * g + k);
      std::copy(scratch.data().begin(), scratch.data().end(), dst.begin());
    }
  }
  return y;
}

/// fanout_conv with symmetric padding.
template <Real T>
Tensor<T> fanout_conv(const Tensor<T>& x, const Tensor<T>& bank, std::size_t pad, MacCounter* counter = nullptr) {
  return fanout_conv(x, bank, Padding{pad, pad, pad, pad}, counter);
}

}  // namespace swconv
