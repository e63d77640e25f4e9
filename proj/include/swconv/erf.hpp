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

// Effective receptive field of a single-channel linear stack, computed with
// one adjoint pass from the centre output pixel.

#include <cmath>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "swconv/shift_plan.hpp"
#include "swconv/sw_op.hpp"
#include "swconv/tensor.hpp"

namespace swconv {

/// Depthwise same conv with one (kh, kw) kernel, odd sides.
struct DepthwiseLayer {
  Tensor<double> kernel;
};

/// One-channel shiftwise operator; norms must be identity.
struct SwLayer {
  SwConfig cfg;
  SwWeights<double> weights;
  ShiftPlan plan;
};

/// Any pointwise nonlinearity; always rejected.
struct ActivationLayer {
  std::string name;
};

using ErfLayer = std::variant<DepthwiseLayer, SwLayer, ActivationLayer>;

namespace detail {

inline void check_erf_layer(const ErfLayer& l) {
  if (const auto* a = std::get_if<ActivationLayer>(&l))
    throw MustFoldError("nonlinear layer '" + a->name + "' in ERF stack");
  if (const auto* d = std::get_if<DepthwiseLayer>(&l)) {
    const auto& k = d->kernel;
    if (k.rank() != 2 || k.extent(0) % 2 == 0 || k.extent(1) % 2 == 0)
      throw ShapeError("ERF depthwise kernel must be 2-D with odd sides");
  }
  if (const auto* s = std::get_if<SwLayer>(&l)) {
    if (s->cfg.C != 1 || s->cfg.ghost_channels() != 0) throw ShapeError("ERF SW layer must be single-channel");
    s->weights.check_matches(s->cfg);
    s->plan.check_matches(s->cfg);
    if (!s->weights.norms_are_identity()) throw MustFoldError("ERF SW layer has non-identity norms");
  }
}

// grad_x[y,x] += sum_{u,v} k[u,v] * grad_out[y-u+ph, x-v+pw] over the grid of grad_out.
inline void conv_adjoint(const std::vector<double>& gout, std::ptrdiff_t row0, std::ptrdiff_t col0, std::size_t gr,
                         std::size_t gc, std::span<const double> k, std::size_t kh, std::size_t kw,
                         std::vector<double>& gx, std::size_t h, std::size_t w) {
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2), pw = static_cast<std::ptrdiff_t>(kw / 2);
  for (std::size_t r = 0; r < gr; ++r)
    for (std::size_t c = 0; c < gc; ++c) {
      const double g = gout[r * gc + c];
      if (g == 0.0) continue;
      const std::ptrdiff_t oy = row0 + static_cast<std::ptrdiff_t>(r), ox = col0 + static_cast<std::ptrdiff_t>(c);
      for (std::size_t u = 0; u < kh; ++u) {
        const std::ptrdiff_t y = oy + static_cast<std::ptrdiff_t>(u) - ph;
        if (y < 0 || y >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t v = 0; v < kw; ++v) {
          const std::ptrdiff_t x = ox + static_cast<std::ptrdiff_t>(v) - pw;
          if (x < 0 || x >= static_cast<std::ptrdiff_t>(w)) continue;
          gx[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)] += g * k[u * kw + v];
        }
      }
    }
}

inline std::vector<double> adjoint(const DepthwiseLayer& d, const std::vector<double>& gy, std::size_t p) {
  std::vector<double> gx(p * p, 0.0);
  conv_adjoint(gy, 0, 0, p, p, d.kernel.data(), d.kernel.extent(0), d.kernel.extent(1), gx, p, p);
  return gx;
}

inline std::vector<double> adjoint(const SwLayer& s, const std::vector<double>& gy, std::size_t p) {
  const auto& cfg = s.cfg;
  const std::size_t g = cfg.fanout(), n = cfg.N;
  const auto m = working_margins(cfg, s.plan);
  const std::size_t gr = p + m.top + m.bottom, gc = p + m.left + m.right;
  const auto row0 = -static_cast<std::ptrdiff_t>(m.top), col0 = -static_cast<std::ptrdiff_t>(m.left);
  const auto P = static_cast<std::ptrdiff_t>(p);
  const auto bank = merged_bank(s.weights);

  // Shift adjoint: every map receives the output gradient at negated displacement.
  std::vector<std::vector<double>> gmap(g, std::vector<double>(gr * gc, 0.0));
  std::vector<double> gcenter;  // independent centre bank only
  auto scatter = [&](std::vector<double>& dst, Displacement d) {
    for (std::ptrdiff_t i = 0; i < P; ++i) {
      const std::ptrdiff_t r = i + d.dy - row0;
      if (r < 0 || r >= static_cast<std::ptrdiff_t>(gr)) continue;
      for (std::ptrdiff_t j = 0; j < P; ++j) {
        const std::ptrdiff_t c = j + d.dx - col0;
        if (c < 0 || c >= static_cast<std::ptrdiff_t>(gc)) continue;
        dst[static_cast<std::size_t>(r) * gc + static_cast<std::size_t>(c)] += gy[static_cast<std::size_t>(i * P + j)];
      }
    }
  };
  for (std::size_t e = 0; e < cfg.E; ++e) {
    for (auto bt : {BranchType::vertical, BranchType::horizontal})
      if (cfg.has_branch(bt))
        for (std::size_t k = 0; k < g; ++k) scatter(gmap[k], s.plan.displacement(bt, e, 0, k));
    if (cfg.has_branch(BranchType::center)) {
      if (cfg.center_mode == CenterMode::independent) {
        if (gcenter.empty()) gcenter.assign(p * p, 0.0);
        for (std::size_t i = 0; i < p * p; ++i) gcenter[i] += gy[i];
      } else {
        scatter(gmap[cfg.center_block()], {});
      }
    }
  }
  std::vector<double> gx(p * p, 0.0);
  for (std::size_t k = 0; k < g; ++k)
    conv_adjoint(gmap[k], row0, col0, gr, gc, bank.data().subspan(k * n * n, n * n), n, n, gx, p, p);
  if (!gcenter.empty()) conv_adjoint(gcenter, 0, 0, p, p, s.weights.center_bank->data(), n, n, gx, p, p);
  return gx;
}

}  // namespace detail

/// |d y_centre / d x| over a probe x probe input, normalized to max 1.
/// Layers apply in order; the adjoint runs in reverse.
inline Tensor<double> erf_map(const std::vector<ErfLayer>& stack, std::size_t probe = 63) {
  if (probe % 2 == 0) throw ConfigError("probe size must be odd");
  for (const auto& l : stack) detail::check_erf_layer(l);
  std::vector<double> g(probe * probe, 0.0);
  g[(probe / 2) * probe + probe / 2] = 1.0;
  for (auto it = stack.rbegin(); it != stack.rend(); ++it)
    g = std::visit(
        [&](const auto& layer) -> std::vector<double> {
          using L = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<L, ActivationLayer>) return {};
          else return detail::adjoint(layer, g, probe);
        },
        *it);
  Tensor<double> out(Shape{static_cast<std::int64_t>(probe), static_cast<std::int64_t>(probe)});
  double mx = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    out[i] = std::fabs(g[i]);
    mx = std::max(mx, out[i]);
  }
  if (mx > 0.0)
    for (auto& v : out.data()) v /= mx;
  return out;
}

/// Binary PGM rendering of a [0,1] map.
inline void write_pgm(const Tensor<double>& m, const std::string& path) {
  if (m.rank() != 2) throw ShapeError("PGM needs a 2-D map");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  f << "P5\n" << m.extent(1) << " " << m.extent(0) << "\n255\n";
  for (double v : m.data()) f.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
}

}  // namespace swconv
