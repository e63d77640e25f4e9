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

// Test-only oracles. These deliberately avoid every library code path they are
// used to check: explicit zero-padded copies instead of bounds tests, and no
// calls into conv_ref, sw_op or reparam.

#include <cmath>
#include <cstddef>
#include <vector>

#include "swconv/rng.hpp"
#include "swconv/tensor.hpp"

namespace oracle {

using swconv::Tensor;

/// Copy of x (C,H,W) into a zero-filled (C, H+top+bottom, W+left+right) buffer.
template <typename T>
std::vector<double> padded(const Tensor<T>& x, std::size_t top, std::size_t bottom, std::size_t left,
                           std::size_t right, std::size_t& ph, std::size_t& pw) {
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  ph = h + top + bottom;
  pw = w + left + right;
  std::vector<double> out(c * ph * pw, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) out[(ch * ph + i + top) * pw + j + left] = x.at(ch, i, j);
  return out;
}

/// Grouped conv, stride 1, symmetric pads, computed on a padded copy.
/// Weights (O, C/groups, kh, kw).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, std::size_t pad_h, std::size_t pad_w, std::size_t groups) {
  std::size_t ph = 0, pw = 0;
  const auto xp = padded(x, pad_h, pad_h, pad_w, pad_w, ph, pw);
  const std::size_t o_ch = w.extent(0), cin_g = w.extent(1), kh = w.extent(2), kw = w.extent(3);
  const std::size_t oh = ph - kh + 1, ow = pw - kw + 1;
  const std::size_t cout_g = o_ch / groups;
  Tensor<T> y(swconv::Shape{static_cast<std::int64_t>(o_ch), static_cast<std::int64_t>(oh), static_cast<std::int64_t>(ow)});
  for (std::size_t o = 0; o < o_ch; ++o) {
    const std::size_t grp = o / cout_g;
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = 0;
        for (std::size_t c = 0; c < cin_g; ++c)
          for (std::size_t u = 0; u < kh; ++u)
            for (std::size_t v = 0; v < kw; ++v)
              acc += static_cast<double>(w.at(o, c, u, v)) * xp[((grp * cin_g + c) * ph + i + u) * pw + j + v];
        y.at(o, i, j) = static_cast<T>(acc);
      }
  }
  return y;
}

/// Depthwise "same" conv of each channel with its own (kh x kw) kernel,
/// kernels shaped (C, kh, kw), pads kh//2, kw//2.
template <typename T>
Tensor<T> depthwise_same(const Tensor<T>& x, const Tensor<T>& k) {
  const std::size_t c = x.extent(0);
  Tensor<T> w(swconv::Shape{static_cast<std::int64_t>(c), 1, static_cast<std::int64_t>(k.extent(1)),
                            static_cast<std::int64_t>(k.extent(2))},
              std::vector<T>(k.data().begin(), k.data().end()));
  return conv2d(x, w, k.extent(1) / 2, k.extent(2) / 2, c);
}

template <typename T>
Tensor<T> random_tensor(swconv::Shape s, std::uint64_t key, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(s));
  swconv::CounterRng rng(key);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

}  // namespace oracle
