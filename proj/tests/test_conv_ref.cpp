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
#include <bit>

#include "oracles.hpp"
#include "swconv/conv_ref.hpp"

using namespace swconv;

TEST(Conv2dRef, IdentityKernel) {
  auto x = oracle::random_tensor<double>(Shape{3, 5, 4}, 1);
  Tensor<double> w(Shape{3, 1, 1, 1}, {1, 1, 1});
  auto y = conv2d_ref(x, w, ConvParams{1, 1, 0, 0, 1, 3});
  EXPECT_TRUE(y.bit_equal(x));
}

TEST(Conv2dRef, AllOnesCountsOverlappedTaps) {
  Tensor<double> x(Shape{1, 3, 3}, std::vector<double>(9, 1.0));
  Tensor<double> w(Shape{1, 1, 3, 3}, std::vector<double>(9, 1.0));
  auto y = conv2d_ref(x, w, ConvParams{3, 3, 1, 1, 1, 1});
  EXPECT_EQ(y.at(0, 1, 1), 9.0);
  EXPECT_EQ(y.at(0, 0, 0), 4.0);
  EXPECT_EQ(y.at(0, 2, 2), 4.0);
  EXPECT_EQ(y.at(0, 0, 1), 6.0);
}

TEST(Conv2dRef, MatchesIndependentPaddedOracle) {
  for (std::uint64_t s = 0; s < 12; ++s) {
    CounterRng rng(s + 100);
    const std::size_t groups = 1 + rng.bounded(3);
    const std::size_t cin = groups * (1 + rng.bounded(2));
    const std::size_t cout = groups * (1 + rng.bounded(2));
    const std::size_t kh = 1 + rng.bounded(5), kw = 1 + rng.bounded(5);
    const std::size_t ph = rng.bounded(3), pw = rng.bounded(3);
    const std::size_t h = kh + 2 + rng.bounded(6), w = kw + 2 + rng.bounded(6);
    auto x = oracle::random_tensor<double>(Shape{(long)cin, (long)h, (long)w}, s);
    auto wt = oracle::random_tensor<double>(Shape{(long)cout, (long)(cin / groups), (long)kh, (long)kw}, s + 50);
    auto y = conv2d_ref(x, wt, ConvParams{kh, kw, ph, pw, 1, groups});
    auto z = oracle::conv2d(x, wt, ph, pw, groups);
    EXPECT_LE(max_abs_diff(y, z), 1e-12) << "seed " << s;
  }
}

TEST(Conv2dRef, StrideTwoAndBatch) {
  auto x = oracle::random_tensor<double>(Shape{2, 2, 7, 7}, 3);
  auto w = oracle::random_tensor<double>(Shape{4, 2, 3, 3}, 4);
  MacCounter mc;
  auto y = conv2d_ref(x, w, ConvParams{3, 3, 1, 1, 2, 1}, &mc);
  ASSERT_EQ(y.shape(), (Shape{2, 4, 4, 4}));
  EXPECT_EQ(mc.macs, 2u * 4 * 4 * 4 * 9 * 2);
  // Spot check one stride-2 output against the definition.
  double acc = 0;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t u = 0; u < 3; ++u)
      for (std::size_t v = 0; v < 3; ++v) {
        const std::ptrdiff_t yy = 2 * 1 + (std::ptrdiff_t)u - 1, xx = 2 * 2 + (std::ptrdiff_t)v - 1;
        acc += w.at(3, c, u, v) * x.at(1, c, (std::size_t)yy, (std::size_t)xx);
      }
  EXPECT_NEAR(y.at(1, 3, 1, 2), acc, 1e-12);
  EXPECT_THROW(conv2d_ref(x, w, ConvParams{3, 3, 1, 1, 3, 1}), ConfigError);
}

TEST(Conv2dRef, ShapeErrors) {
  auto x = oracle::random_tensor<double>(Shape{3, 5, 5}, 1);
  auto w = oracle::random_tensor<double>(Shape{2, 3, 3, 3}, 2);
  EXPECT_THROW(conv2d_ref(x, w, ConvParams{3, 3, 1, 1, 1, 2}), ShapeError);  // 3 % 2
  EXPECT_THROW(conv2d_ref(x, w, ConvParams{5, 5, 1, 1, 1, 1}), ShapeError);  // kernel mismatch
}

// Property: the reference conv is linear.
TEST(Conv2dRef, Linearity) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto x1 = oracle::random_tensor<double>(Shape{2, 9, 8}, s);
    auto x2 = oracle::random_tensor<double>(Shape{2, 9, 8}, s + 1000);
    auto w = oracle::random_tensor<double>(Shape{2, 1, 3, 5}, s + 2000);
    CounterRng rng(s);
    const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
    Tensor<double> mix(x1.shape());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x1[i] + b * x2[i];
    const ConvParams p{3, 5, 1, 2, 1, 2};
    auto y = conv2d_ref(mix, w, p);
    auto y1 = conv2d_ref(x1, w, p), y2 = conv2d_ref(x2, w, p);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], a * y1[i] + b * y2[i], 1e-10);
  }
}

// Property: shifting the input shifts the output on the region padding does not reach.
TEST(Conv2dRef, TranslationEquivarianceOnInterior) {
  const std::size_t h = 16, w = 16, k = 5, dy = 2, dx = 3;
  auto x = oracle::random_tensor<double>(Shape{1, (long)h, (long)w}, 9);
  Tensor<double> xs(x.shape());
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) xs.at(0, i, j) = x.get_zero_extended(0, (std::ptrdiff_t)i - (std::ptrdiff_t)dy, (std::ptrdiff_t)j - (std::ptrdiff_t)dx);
  auto wt = oracle::random_tensor<double>(Shape{1, 1, (long)k, (long)k}, 10);
  const ConvParams p{k, k, k / 2, k / 2, 1, 1};
  auto y = conv2d_ref(x, wt, p), ys = conv2d_ref(xs, wt, p);
  for (std::size_t i = k + dy; i + k < h; ++i)
    for (std::size_t j = k + dx; j + k < w; ++j) EXPECT_EQ(ys.at(0, i, j), y.at(0, i - dy, j - dx));
}

TEST(StripConvRef, DeltaKernelIsIdentity) {
  auto x = oracle::random_tensor<double>(Shape{2, 10, 7}, 5);
  Tensor<double> k(Shape{2, 9, 3});
  k.at(0, 4, 1) = 1;
  k.at(1, 4, 1) = 1;
  EXPECT_TRUE(strip_conv_ref(x, k).bit_equal(x));
}

TEST(StripConvRef, MatchesGroupedConvOracle) {
  auto x = oracle::random_tensor<double>(Shape{3, 20, 17}, 6);
  auto k = oracle::random_tensor<double>(Shape{3, 51, 3}, 7);
  auto y = strip_conv_ref(x, k);
  auto z = oracle::depthwise_same(x, k);
  EXPECT_LE(max_abs_diff(y, z), 1e-12);
}

TEST(StripConvRef, HorizontalIsTransposeOfVertical) {
  auto x = oracle::random_tensor<double>(Shape{2, 11, 13}, 8);
  auto kv = oracle::random_tensor<double>(Shape{2, 7, 3}, 9);
  Tensor<double> xt(Shape{2, 13, 11}), kh(Shape{2, 3, 7});
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < 11; ++i)
      for (std::size_t j = 0; j < 13; ++j) xt.at(c, j, i) = x.at(c, i, j);
    for (std::size_t m = 0; m < 7; ++m)
      for (std::size_t n = 0; n < 3; ++n) kh.at(c, n, m) = kv.at(c, m, n);
  }
  auto yh = strip_conv_ref(x, kh);
  auto yv = strip_conv_ref(xt, kv);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 11; ++i)
      for (std::size_t j = 0; j < 13; ++j) EXPECT_NEAR(yh.at(c, i, j), yv.at(c, j, i), 1e-13);
}

TEST(StripConvRef, EvenKernelNeedsExplicitPads) {
  auto x = oracle::random_tensor<double>(Shape{1, 8, 8}, 1);
  auto k = oracle::random_tensor<double>(Shape{1, 4, 3}, 2);
  EXPECT_THROW(strip_conv_ref(x, k), ConfigError);
}

TEST(FanoutConv, DegeneratesToDepthwise) {
  auto x = oracle::random_tensor<double>(Shape{3, 9, 9}, 1);
  auto bank = oracle::random_tensor<double>(Shape{3, 1, 3, 3}, 2);
  auto y = fanout_conv(x, bank, 1);
  Tensor<double> k(Shape{3, 3, 3}, std::vector<double>(bank.data().begin(), bank.data().end()));
  EXPECT_LE(max_abs_diff(y, oracle::depthwise_same(x, k)), 1e-12);
}

TEST(FanoutConv, ChannelBookkeeping) {
  auto x = oracle::random_tensor<double>(Shape{2, 6, 7}, 3);
  auto bank = oracle::random_tensor<double>(Shape{2, 3, 3, 3}, 4);
  auto y = fanout_conv(x, bank, 1);
  ASSERT_EQ(y.extent(0), 6u);
  // Channel 4 = c*g+k with c=1, k=1.
  Tensor<double> x1(Shape{1, 6, 7}, std::vector<double>(x.channel(1).begin(), x.channel(1).end()));
  Tensor<double> w11(Shape{1, 1, 3, 3});
  for (std::size_t u = 0; u < 3; ++u)
    for (std::size_t v = 0; v < 3; ++v) w11.at(0, 0, u, v) = bank.at(1, 1, u, v);
  auto ref = conv2d_ref(x1, w11, ConvParams{3, 3, 1, 1, 1, 1});
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(y.at(4, i, j), ref.at(0, i, j));
}

TEST(FanoutConv, MatchesPerChannelConvOracle) {
  auto x = oracle::random_tensor<double>(Shape{3, 8, 10}, 5);
  auto bank = oracle::random_tensor<double>(Shape{3, 4, 5, 5}, 6);
  auto y = fanout_conv(x, bank, 2);
  // Oracle: grouped conv with groups = C and C*g outputs.
  Tensor<double> w(Shape{12, 1, 5, 5}, std::vector<double>(bank.data().begin(), bank.data().end()));
  EXPECT_LE(max_abs_diff(y, oracle::conv2d(x, w, 2, 2, 3)), 1e-12);
}

TEST(FanoutConv, AsymmetricPaddingGrowsGrid) {
  auto x = oracle::random_tensor<double>(Shape{1, 8, 8}, 7);
  auto bank = oracle::random_tensor<double>(Shape{1, 2, 3, 3}, 8);
  MacCounter mc;
  auto y = fanout_conv(x, bank, Padding{1, 2, 1, 2}, &mc);
  EXPECT_EQ(y.shape(), (Shape{2, 9, 9}));
  EXPECT_EQ(mc.macs, 2u * 81 * 9);
  EXPECT_THROW(fanout_conv(x, oracle::random_tensor<double>(Shape{2, 2, 3, 3}, 1), 1), ShapeError);
}

TEST(CorrelateRow, BitIdenticalToPointwise) {
  const auto x = oracle::random_tensor<float>(Shape{7, 9}, 21);
  for (std::size_t kw : {1u, 3u, 5u}) {
    const auto k = oracle::random_tensor<float>(Shape{3, static_cast<std::int64_t>(kw)}, 22);
    for (std::ptrdiff_t r = -3; r < 10; ++r) {
      std::vector<float> row(17);
      correlate_row<float>(x.data(), 7, 9, k.data(), 3, kw, 1, kw / 2, r, -4, row.size(), row.data());
      for (std::size_t j = 0; j < row.size(); ++j) {
        const float ref = correlate_at<float>(x.data(), 7, 9, k.data(), 3, kw, 1, kw / 2, r, static_cast<std::ptrdiff_t>(j) - 4);
        EXPECT_EQ(std::bit_cast<std::uint32_t>(row[j]), std::bit_cast<std::uint32_t>(ref)) << r << "," << j;
      }
    }
  }
}
