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

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "swconv/rng.hpp"
#include "swconv/sw_config.hpp"
#include "swconv/tensor.hpp"

namespace swconv {

/// Per-channel affine normalization with running statistics:
///   y = (x - mean) * gamma / sqrt(var + eps) + beta
template <Real T>
struct AffineNorm {
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> mean;
  std::vector<T> var;
  double eps = 1e-5;

  static AffineNorm identity(std::size_t channels) {
    return {std::vector<T>(channels, T{1}), std::vector<T>(channels, T{0}), std::vector<T>(channels, T{0}),
            std::vector<T>(channels, T{1}), 0.0};
  }

  std::size_t channels() const { return gamma.size(); }

  void validate() const {
    const auto n = gamma.size();
    if (beta.size() != n || mean.size() != n || var.size() != n) throw ShapeError("norm vectors differ in length");
    if (!(eps >= 0.0)) throw ConfigError("norm eps must be non-negative");
    for (std::size_t c = 0; c < n; ++c) {
      if (!(var[c] >= T{0})) throw ConfigError("norm variance must be non-negative");
      if (!(static_cast<double>(var[c]) + eps > 0.0)) throw ConfigError("norm var + eps must be positive");
    }
  }

  double scale(std::size_t c) const {
    return static_cast<double>(gamma[c]) / std::sqrt(static_cast<double>(var[c]) + eps);
  }
  double shift(std::size_t c) const {
    return static_cast<double>(beta[c]) - static_cast<double>(mean[c]) * scale(c);
  }
  T apply(T x, std::size_t c) const {
    return static_cast<T>((static_cast<double>(x) - static_cast<double>(mean[c])) * scale(c) +
                          static_cast<double>(beta[c]));
  }

  bool is_identity() const {
    for (std::size_t c = 0; c < gamma.size(); ++c) {
      if (gamma[c] != T{1} || beta[c] != T{0} || mean[c] != T{0}) return false;
      if (static_cast<double>(var[c]) + eps != 1.0) return false;
    }
    return true;
  }

  /// (5, C) tensor with rows gamma, beta, mean, var, eps.
  Tensor<T> to_tensor() const {
    const auto n = channels();
    Tensor<T> t(Shape{5, static_cast<std::int64_t>(n)});
    for (std::size_t c = 0; c < n; ++c) {
      t[c] = gamma[c];
      t[n + c] = beta[c];
      t[2 * n + c] = mean[c];
      t[3 * n + c] = var[c];
      t[4 * n + c] = static_cast<T>(eps);
    }
    return t;
  }
  static AffineNorm from_tensor(const Tensor<T>& t) {
    if (t.rank() != 2 || t.extent(0) != 5) throw ShapeError("norm tensor must be (5, C), got " + t.shape().str());
    const auto n = t.extent(1);
    AffineNorm a;
    a.eps = static_cast<double>(t[4 * n]);
    for (std::size_t c = 0; c < n; ++c) {
      if (t[4 * n + c] != t[4 * n]) throw FormatError("norm eps must be uniform across channels");
      a.gamma.push_back(t[c]);
      a.beta.push_back(t[n + c]);
      a.mean.push_back(t[2 * n + c]);
      a.var.push_back(t[3 * n + c]);
    }
    a.validate();
    return a;
  }
};

/// Keep/prune flag per fan-out filter (c, k); true means the filter is kept.
class FilterMask {
 public:
  FilterMask() = default;
  FilterMask(std::size_t channels, std::size_t fanout, bool keep = true)
      : channels_(channels), fanout_(fanout), keep_(channels * fanout, keep ? 1 : 0) {}

  std::size_t channels() const { return channels_; }
  std::size_t fanout() const { return fanout_; }
  std::size_t size() const { return keep_.size(); }

  bool kept(std::size_t c, std::size_t k) const { return keep_[c * fanout_ + k] != 0; }
  bool kept(std::size_t i) const { return keep_[i] != 0; }
  void set(std::size_t c, std::size_t k, bool keep) { keep_[c * fanout_ + k] = keep ? 1 : 0; }
  void set(std::size_t i, bool keep) { keep_[i] = keep ? 1 : 0; }

  std::size_t pruned_count() const {
    std::size_t n = 0;
    for (auto v : keep_) n += v == 0;
    return n;
  }
  double sparsity() const { return keep_.empty() ? 0.0 : static_cast<double>(pruned_count()) / static_cast<double>(keep_.size()); }

  /// 0/1 f32 container view.
  Tensor<float> to_tensor() const {
    Tensor<float> t(Shape{static_cast<std::int64_t>(channels_), static_cast<std::int64_t>(fanout_)});
    for (std::size_t i = 0; i < keep_.size(); ++i) t[i] = keep_[i] ? 1.0f : 0.0f;
    return t;
  }
  static FilterMask from_tensor(const Tensor<float>& t) {
    if (t.rank() != 2) throw ShapeError("mask tensor must be (C, g)");
    FilterMask m(t.extent(0), t.extent(1));
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] != 0.0f && t[i] != 1.0f) throw FormatError("mask values must be 0 or 1");
      m.keep_[i] = t[i] == 1.0f;
    }
    return m;
  }

  bool operator==(const FilterMask&) const = default;

 private:
  std::size_t channels_ = 0;
  std::size_t fanout_ = 0;
  std::vector<std::uint8_t> keep_;
};

/// Weights of one shiftwise operator.
template <Real T>
struct SwWeights {
  std::vector<Tensor<T>> rep;                 // b banks, each (C_sw, g, N, N)
  std::vector<FilterMask> mask;               // one per rep branch
  std::array<AffineNorm<T>, kBranchTypes> norm;  // H, W, centre
  std::optional<Tensor<T>> center_bank;       // (C_sw, N, N) for CenterMode::independent

  /// Throws ShapeError/ConfigError if these weights cannot drive `cfg`.
  void check_matches(const SwConfig& cfg) const {
    const auto cs = static_cast<std::size_t>(cfg.sw_channels());
    const Shape bank{static_cast<std::int64_t>(cs), static_cast<std::int64_t>(cfg.fanout()),
                     static_cast<std::int64_t>(cfg.N), static_cast<std::int64_t>(cfg.N)};
    if (rep.size() != cfg.b) throw ShapeError("expected " + std::to_string(cfg.b) + " rep banks");
    if (mask.size() != cfg.b) throw ShapeError("expected " + std::to_string(cfg.b) + " masks");
    for (std::size_t r = 0; r < rep.size(); ++r) {
      if (!(rep[r].shape() == bank))
        throw ShapeError("rep bank " + std::to_string(r) + " is " + rep[r].shape().str() + ", expected " + bank.str());
      if (mask[r].channels() != cs || mask[r].fanout() != cfg.fanout())
        throw ShapeError("mask " + std::to_string(r) + " shape mismatch");
    }
    for (const auto& n : norm) {
      if (n.channels() != cs) throw ShapeError("norm channel count mismatch");
      n.validate();
    }
    if (cfg.center_mode == CenterMode::independent) {
      const Shape cb{static_cast<std::int64_t>(cs), static_cast<std::int64_t>(cfg.N), static_cast<std::int64_t>(cfg.N)};
      if (!center_bank || !(center_bank->shape() == cb)) throw ShapeError("independent centre bank missing or misshaped");
    }
  }

  bool norms_are_identity() const {
    for (const auto& n : norm)
      if (!n.is_identity()) return false;
    return true;
  }
};

/// Zero bank of shape (C_sw, g, N, N).
template <Real T>
Tensor<T> zero_bank(const SwConfig& cfg) {
  return Tensor<T>(Shape{static_cast<std::int64_t>(cfg.sw_channels()), static_cast<std::int64_t>(cfg.fanout()),
                         static_cast<std::int64_t>(cfg.N), static_cast<std::int64_t>(cfg.N)});
}

/// Weights with identity norms, all filters kept, every tap uniform in
/// [-scale, scale) from the stream keyed by (key, layer, branch).
template <Real T>
SwWeights<T> random_sw_weights(const SwConfig& cfg, std::uint64_t key, double scale = 1.0) {
  cfg.validate();
  SwWeights<T> w;
  const std::size_t cs = cfg.sw_channels();
  for (std::size_t r = 0; r < cfg.b; ++r) {
    auto bank = zero_bank<T>(cfg);
    CounterRng rng({key, cfg.layer_id, r, 0x57454947ull});
    for (auto& v : bank.data()) v = static_cast<T>(rng.uniform(-scale, scale));
    w.rep.push_back(std::move(bank));
    w.mask.emplace_back(cs, cfg.fanout(), true);
  }
  for (auto& n : w.norm) n = AffineNorm<T>::identity(cs);
  if (cfg.center_mode == CenterMode::independent) {
    Tensor<T> cb(Shape{static_cast<std::int64_t>(cs), static_cast<std::int64_t>(cfg.N), static_cast<std::int64_t>(cfg.N)});
    CounterRng rng({key, cfg.layer_id, 0x43454e54ull});
    for (auto& v : cb.data()) v = static_cast<T>(rng.uniform(-scale, scale));
    w.center_bank = std::move(cb);
  }
  return w;
}

/// Random (non-identity) norm records; var in [0.5, 2), gamma in [0.5, 1.5).
template <Real T>
AffineNorm<T> random_norm(std::size_t channels, std::uint64_t key, double eps) {
  CounterRng rng(key);
  AffineNorm<T> n;
  n.eps = eps;
  for (std::size_t c = 0; c < channels; ++c) {
    n.gamma.push_back(static_cast<T>(rng.uniform(0.5, 1.5)));
    n.beta.push_back(static_cast<T>(rng.uniform(-1.0, 1.0)));
    n.mean.push_back(static_cast<T>(rng.uniform(-0.5, 0.5)));
    n.var.push_back(static_cast<T>(rng.uniform(0.5, 2.0)));
  }
  return n;
}

// On-disk layout: rep{r}.swt, mask{r}.swt, bn_{H|W|center}.swt, centre.swt.

template <Real T>
void save_sw_weights(const SwWeights<T>& w, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t r = 0; r < w.rep.size(); ++r) {
    write_container(w.rep[r], (dir / ("rep" + std::to_string(r) + ".swt")).string());
    write_container(w.mask[r].to_tensor(), (dir / ("mask" + std::to_string(r) + ".swt")).string());
  }
  for (std::size_t t = 0; t < kBranchTypes; ++t)
    write_container(w.norm[t].to_tensor(),
                    (dir / (std::string("bn_") + branch_name(static_cast<BranchType>(t)) + ".swt")).string());
  if (w.center_bank) write_container(*w.center_bank, (dir / "center.swt").string());
}

template <Real T>
SwWeights<T> load_sw_weights(const SwConfig& cfg, const std::filesystem::path& dir) {
  SwWeights<T> w;
  for (std::size_t r = 0; r < cfg.b; ++r) {
    w.rep.push_back(read_container_as<T>((dir / ("rep" + std::to_string(r) + ".swt")).string()));
    const auto mpath = dir / ("mask" + std::to_string(r) + ".swt");
    if (std::filesystem::exists(mpath))
      w.mask.push_back(FilterMask::from_tensor(read_container_as<float>(mpath.string())));
    else
      w.mask.emplace_back(cfg.sw_channels(), cfg.fanout(), true);
  }
  for (std::size_t t = 0; t < kBranchTypes; ++t) {
    const auto p = dir / (std::string("bn_") + branch_name(static_cast<BranchType>(t)) + ".swt");
    if (std::filesystem::exists(p))
      w.norm[t] = AffineNorm<T>::from_tensor(read_container_as<T>(p.string()));
    else
      w.norm[t] = AffineNorm<T>::identity(cfg.sw_channels());
  }
  if (cfg.center_mode == CenterMode::independent)
    w.center_bank = read_container_as<T>((dir / "center.swt").string());
  w.check_matches(cfg);
  return w;
}

}  // namespace swconv
