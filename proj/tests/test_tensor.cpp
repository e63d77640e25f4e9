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

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "swconv/swconv.hpp"

using namespace swconv;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "swconv_tensor_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Tensor, ZerosSmall) {
  auto t = zeros<double>(Shape{1, 2, 2});
  ASSERT_EQ(t.size(), 4u);
  for (double v : t.data()) EXPECT_EQ(v, 0.0);
}

TEST(Tensor, ZerosCountMatchesShape) {
  auto t = zeros<float>(Shape{3, 4, 5});
  EXPECT_EQ(t.size(), 60u);
  for (float v : t.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Tensor, ZeroOrNegativeExtentRejected) {
  EXPECT_THROW(zeros<double>(Shape{0, 2, 2}), ShapeError);
  EXPECT_THROW(zeros<double>(Shape{2, -1, 2}), ShapeError);
  EXPECT_THROW((Tensor<double>(Shape{2, 2}, std::vector<double>(3))), ShapeError);
}

TEST(Tensor, ZeroExtendedAccess) {
  auto t = zeros<double>(Shape{1, 3, 4});
  t.at(0, 0, 0) = 7;
  EXPECT_EQ(t.get_zero_extended(0, -1, 0), 0.0);
  EXPECT_EQ(t.get_zero_extended(0, 0, 0), 7.0);
  EXPECT_EQ(t.get_zero_extended(0, 3, 0), 0.0);
  EXPECT_EQ(t.get_zero_extended(0, 0, 4), 0.0);
  EXPECT_THROW(t.get_zero_extended(1, 0, 0), IndexError);
}

TEST(Tensor, ZeroExtendedAgreesWithIndexingInBounds) {
  auto t = oracle::random_tensor<double>(Shape{2, 5, 6}, 11);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::ptrdiff_t y = 0; y < 5; ++y)
      for (std::ptrdiff_t x = 0; x < 6; ++x)
        EXPECT_EQ(t.get_zero_extended(c, y, x), t.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)));
}

TEST(Tensor, OutOfBoundsAccessThrows) {
  auto t = zeros<float>(Shape{1, 2, 2});
  EXPECT_THROW(t.at(0, 2, 0), IndexError);
  EXPECT_THROW(t.at(0, 0, 0, 0), ShapeError);
}

TEST(Container, HeaderLayoutIsBitExact) {
  Tensor<float> t(Shape{1, 2}, {1.0f, -2.0f});
  const auto bytes = encode_container(t);
  ASSERT_EQ(bytes.size(), 4u + 1 + 1 + 6 + 2 * 8 + 2 * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SWT1");
  EXPECT_EQ(bytes[4], 0);  // f32
  EXPECT_EQ(bytes[5], 2);  // rank
  for (int i = 6; i < 12; ++i) EXPECT_EQ(bytes[static_cast<std::size_t>(i)], 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 1u);  // extent 1 little endian
  EXPECT_EQ(static_cast<unsigned char>(bytes[20]), 2u);
  // 1.0f = 0x3f800000 little endian
  EXPECT_EQ(static_cast<unsigned char>(bytes[28]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(bytes[31]), 0x3f);
}

// Property: write/read is the identity on shape, dtype and element bits.
TEST(Container, RoundTripPreservesBits) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    CounterRng rng(seed);
    const auto rank = 1 + rng.bounded(4);
    std::vector<std::int64_t> ext;
    for (std::size_t i = 0; i < rank; ++i) ext.push_back(static_cast<std::int64_t>(1 + rng.bounded(5)));
    auto d = oracle::random_tensor<double>(Shape(ext), seed, -1e300, 1e300);
    d[0] = -0.0;
    auto f = d.cast<float>();
    const auto pd = temp_file("rt_d.swt").string();
    const auto pf = temp_file("rt_f.swt").string();
    write_container(d, pd);
    write_container(f, pf);
    EXPECT_TRUE(read_container<double>(pd).bit_equal(d));
    EXPECT_TRUE(read_container<float>(pf).bit_equal(f));
    EXPECT_THROW(read_container<float>(pd), FormatError);
  }
}

TEST(Container, F64KeepsFullPrecision) {
  Tensor<double> t(Shape{3}, {0.1, 1.0 / 3.0, 5e-324});
  const auto p = temp_file("prec.swt").string();
  write_container(t, p);
  auto r = read_container<double>(p);
  EXPECT_TRUE(r.bit_equal(t));
}

TEST(Container, RejectsMalformedFiles) {
  Tensor<double> t(Shape{2, 2}, {1, 2, 3, 4});
  auto bytes = encode_container(t);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_container(bad_magic), FormatError);

  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_container(truncated), FormatError);

  auto big_rank = bytes;
  big_rank[5] = 9;
  EXPECT_THROW(decode_container(big_rank), FormatError);

  auto reserved = bytes;
  reserved[7] = 1;
  EXPECT_THROW(decode_container(reserved), FormatError);

  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_container(trailing), FormatError);

  EXPECT_THROW(decode_container(std::vector<char>{'S', 'W'}), FormatError);
}

TEST(Container, RankAboveEightCannotBeWritten) {
  Tensor<float> t(Shape{1, 1, 1, 1, 1, 1, 1, 1, 1});
  EXPECT_THROW(encode_container(t), FormatError);
}
