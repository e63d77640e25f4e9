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
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "swconv/error.hpp"

namespace swconv {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

template <typename T>
concept Real = std::is_same_v<T, float> || std::is_same_v<T, double>;

template <Real T>
constexpr DType dtype_of() {
  return std::is_same_v<T, float> ? DType::f32 : DType::f64;
}

inline const char* dtype_name(DType d) { return d == DType::f32 ? "f32" : "f64"; }

// Accumulator type for reference paths: always the widest real.
using Accum = double;

/// Extents of a tensor, outermost first. Every extent is at least one.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::int64_t> extents)
      : Shape(std::vector<std::int64_t>(extents)) {}
  explicit Shape(const std::vector<std::int64_t>& extents) {
    if (extents.empty()) throw ShapeError("rank must be at least 1");
    dims_.reserve(extents.size());
    for (auto e : extents) {
      if (e < 1) throw ShapeError("extent " + std::to_string(e) + " is not positive");
      dims_.push_back(static_cast<std::size_t>(e));
    }
  }
  static Shape of(std::span<const std::size_t> extents) {
    std::vector<std::int64_t> v(extents.begin(), extents.end());
    return Shape(v);
  }

  std::size_t rank() const { return dims_.size(); }
  std::size_t operator[](std::size_t i) const { return dims_.at(i); }
  std::size_t elements() const {
    return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
  }
  const std::vector<std::size_t>& dims() const { return dims_; }

  bool operator==(const Shape&) const = default;

  std::string str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(dims_[i]);
    }
    return s + ")";
  }

 private:
  std::vector<std::size_t> dims_;
};

/// Dense row-major tensor, channel outermost. Rank 3 is (C,H,W), rank 4 is
/// (B,C,H,W); other ranks are plain containers (filter banks, masks, norms).
template <Real T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_.elements(), T{0}) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.elements())
      throw ShapeError("element count " + std::to_string(data_.size()) + " does not match " +
                       shape_.str());
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.rank(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t i) const { return shape_[i]; }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Rank-3 (c, y, x) access; bounds-checked.
  T& at(std::size_t y, std::size_t x) { return data_[offset2(y, x)]; }
  const T& at(std::size_t y, std::size_t x) const { return data_[offset2(y, x)]; }
  T& at(std::size_t c, std::size_t y, std::size_t x) { return data_[offset3(c, y, x)]; }
  const T& at(std::size_t c, std::size_t y, std::size_t x) const { return data_[offset3(c, y, x)]; }

  // Rank-4 access; bounds-checked.
  T& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return data_[offset4(a, b, c, d)];
  }
  const T& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return data_[offset4(a, b, c, d)];
  }

  /// t[c,y,x] for in-bounds (y,x), zero outside. `c` must be valid.
  T get_zero_extended(std::size_t c, std::ptrdiff_t y, std::ptrdiff_t x) const {
    if (rank() != 3) throw ShapeError("get_zero_extended needs rank 3, got " + shape_.str());
    if (c >= shape_[0]) throw IndexError("channel " + std::to_string(c) + " out of range");
    const auto h = static_cast<std::ptrdiff_t>(shape_[1]);
    const auto w = static_cast<std::ptrdiff_t>(shape_[2]);
    if (y < 0 || y >= h || x < 0 || x >= w) return T{0};
    return data_[(c * shape_[1] + static_cast<std::size_t>(y)) * shape_[2] + static_cast<std::size_t>(x)];
  }

  /// Contiguous copy of channel `c` of a rank-3 tensor.
  std::span<const T> channel(std::size_t c) const {
    if (rank() != 3) throw ShapeError("channel() needs rank 3");
    if (c >= shape_[0]) throw IndexError("channel " + std::to_string(c) + " out of range");
    const std::size_t plane = shape_[1] * shape_[2];
    return std::span<const T>(data_).subspan(c * plane, plane);
  }
  std::span<T> channel(std::size_t c) {
    if (rank() != 3) throw ShapeError("channel() needs rank 3");
    if (c >= shape_[0]) throw IndexError("channel " + std::to_string(c) + " out of range");
    const std::size_t plane = shape_[1] * shape_[2];
    return std::span<T>(data_).subspan(c * plane, plane);
  }

  template <Real U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return Tensor<U>(shape_, std::move(out));
  }

  bool bit_equal(const Tensor& o) const {
    if (!(shape_ == o.shape_)) return false;
    return std::equal(data_.begin(), data_.end(), o.data_.begin(), [](T a, T b) {
      using U = std::conditional_t<std::is_same_v<T, float>, std::uint32_t, std::uint64_t>;
      return std::bit_cast<U>(a) == std::bit_cast<U>(b);
    });
  }

 private:
  std::size_t offset2(std::size_t y, std::size_t x) const {
    if (rank() != 2) throw ShapeError("rank-2 access on " + shape_.str());
    if (y >= shape_[0] || x >= shape_[1]) throw IndexError("rank-2 index outside " + shape_.str());
    return y * shape_[1] + x;
  }
  std::size_t offset3(std::size_t c, std::size_t y, std::size_t x) const {
    if (rank() != 3) throw ShapeError("rank-3 access on " + shape_.str());
    if (c >= shape_[0] || y >= shape_[1] || x >= shape_[2])
      throw IndexError("(" + std::to_string(c) + "," + std::to_string(y) + "," + std::to_string(x) +
                       ") outside " + shape_.str());
    return (c * shape_[1] + y) * shape_[2] + x;
  }
  std::size_t offset4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    if (rank() != 4) throw ShapeError("rank-4 access on " + shape_.str());
    if (a >= shape_[0] || b >= shape_[1] || c >= shape_[2] || d >= shape_[3])
      throw IndexError("rank-4 index outside " + shape_.str());
    return ((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d;
  }

  Shape shape_;
  std::vector<T> data_;
};

template <Real T>
Tensor<T> zeros(Shape shape) {
  return Tensor<T>(std::move(shape));
}

/// A 2-D map defined on grid rows [row0, row0+rows) and cols [col0, col0+cols).
/// Grid coordinates may be negative; reads outside the defined region are zero.
template <Real T>
class Plane {
 public:
  Plane() = default;
  Plane(std::ptrdiff_t row0, std::ptrdiff_t col0, std::size_t rows, std::size_t cols)
      : row0_(row0), col0_(col0), rows_(rows), cols_(cols), data_(rows * cols, T{0}) {}

  std::ptrdiff_t row0() const { return row0_; }
  std::ptrdiff_t col0() const { return col0_; }
  std::ptrdiff_t row_end() const { return row0_ + static_cast<std::ptrdiff_t>(rows_); }
  std::ptrdiff_t col_end() const { return col0_ + static_cast<std::ptrdiff_t>(cols_); }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  bool contains(std::ptrdiff_t r, std::ptrdiff_t c) const {
    return r >= row0_ && r < row_end() && c >= col0_ && c < col_end();
  }
  T& operator()(std::ptrdiff_t r, std::ptrdiff_t c) {
    return data_[static_cast<std::size_t>(r - row0_) * cols_ + static_cast<std::size_t>(c - col0_)];
  }
  T operator()(std::ptrdiff_t r, std::ptrdiff_t c) const {
    return data_[static_cast<std::size_t>(r - row0_) * cols_ + static_cast<std::size_t>(c - col0_)];
  }
  T at_or_zero(std::ptrdiff_t r, std::ptrdiff_t c) const { return contains(r, c) ? (*this)(r, c) : T{0}; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

 private:
  std::ptrdiff_t row0_ = 0;
  std::ptrdiff_t col0_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <Real T>
double max_abs_diff(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw ShapeError("max_abs_diff on different sizes");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    if (!(d <= m)) m = d;  // propagates NaN as a failure
  }
  return m;
}

template <Real T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.shape() == b.shape()))
    throw ShapeError("max_abs_diff " + a.shape().str() + " vs " + b.shape().str());
  return max_abs_diff<T>(a.data(), b.data());
}

template <Real T>
bool allclose(const Tensor<T>& a, const Tensor<T>& b, double tol) {
  return max_abs_diff(a, b) <= tol;
}

// ---------------------------------------------------------------------------
// SWT1 container: "SWT1", u8 dtype, u8 rank, 6 zero bytes, rank LE u64
// extents, LE payload. No padding.

inline constexpr std::array<char, 4> kContainerMagic{'S', 'W', 'T', '1'};
inline constexpr std::size_t kContainerMaxRank = 8;

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

namespace detail {

template <typename U>
void put_le(std::vector<char>& out, U v) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

template <Real T>
using BitsOf = std::conditional_t<std::is_same_v<T, float>, std::uint32_t, std::uint64_t>;

}  // namespace detail

template <Real T>
std::vector<char> encode_container(const Tensor<T>& t) {
  if (t.rank() > kContainerMaxRank) throw FormatError("rank " + std::to_string(t.rank()) + " > 8");
  std::vector<char> out(12, '\0');
  out.reserve(12 + 8 * t.rank() + sizeof(T) * t.size());
  std::copy(kContainerMagic.begin(), kContainerMagic.end(), out.begin());
  out[4] = static_cast<char>(dtype_of<T>());
  out[5] = static_cast<char>(t.rank());
  for (auto e : t.shape().dims()) detail::put_le<std::uint64_t>(out, e);
  for (T v : t.data()) detail::put_le(out, std::bit_cast<detail::BitsOf<T>>(v));
  return out;
}

inline AnyTensor decode_container(std::span<const char> bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12) throw FormatError("truncated header");
  if (!std::equal(kContainerMagic.begin(), kContainerMagic.end(), bytes.begin()))
    throw FormatError("bad magic");
  const auto code = p[4];
  const std::size_t rank = p[5];
  if (code > 1) throw FormatError("unknown dtype code " + std::to_string(code));
  if (rank == 0) throw FormatError("rank 0");
  if (rank > kContainerMaxRank) throw FormatError("rank " + std::to_string(rank) + " > 8");
  for (int i = 6; i < 12; ++i)
    if (p[i] != 0) throw FormatError("reserved bytes not zero");
  if (bytes.size() < 12 + 8 * rank) throw FormatError("truncated extents");
  std::vector<std::int64_t> ext(rank);
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const auto e = detail::get_le<std::uint64_t>(p + 12 + 8 * i);
    if (e == 0 || e > (std::uint64_t{1} << 40)) throw FormatError("bad extent");
    ext[i] = static_cast<std::int64_t>(e);
    count *= static_cast<std::size_t>(e);
  }
  const std::size_t width = code == 0 ? 4 : 8;
  const std::size_t header = 12 + 8 * rank;
  if (bytes.size() - header < count * width) throw FormatError("truncated payload");
  if (bytes.size() - header > count * width) throw FormatError("trailing bytes after payload");
  const unsigned char* q = p + header;
  auto fill = [&]<Real T>(std::vector<T>& v) {
    for (std::size_t i = 0; i < count; ++i)
      v[i] = std::bit_cast<T>(detail::get_le<detail::BitsOf<T>>(q + i * sizeof(T)));
  };
  if (code == 0) {
    std::vector<float> v(count);
    fill(v);
    return Tensor<float>(Shape(ext), std::move(v));
  }
  std::vector<double> v(count);
  fill(v);
  return Tensor<double>(Shape(ext), std::move(v));
}

template <Real T>
void write_container(const Tensor<T>& t, const std::string& path) {
  const auto bytes = encode_container(t);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("write failed for " + path);
}

inline AnyTensor read_container_any(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

/// Reads a container and requires its dtype to be T.
template <Real T>
Tensor<T> read_container(const std::string& path) {
  auto any = read_container_any(path);
  if (auto* t = std::get_if<Tensor<T>>(&any)) return std::move(*t);
  throw FormatError(path + ": dtype is not " + dtype_name(dtype_of<T>()));
}

/// Reads a container of either dtype and converts to T.
template <Real T>
Tensor<T> read_container_as(const std::string& path) {
  auto any = read_container_any(path);
  return std::visit([](auto& t) { return t.template cast<T>(); }, any);
}

}  // namespace swconv
