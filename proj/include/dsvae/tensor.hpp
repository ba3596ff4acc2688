/*
 * Copyright 2026 The dsvae Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dsvae/error.hpp"

namespace dsvae {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

/// Dense row-major array. Every extent is at least 1 and the element count
/// always equals the product of the extents; scalars have shape [1].
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : dims_{1}, data_(1, T(0)) {}

  explicit Tensor(Shape dims, T fill = T(0)) : dims_(std::move(dims)) {
    validate_dims();
    data_.assign(shape_size(dims_), fill);
  }

  Tensor(Shape dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
    validate_dims();
    if (data_.size() != shape_size(dims_)) {
      throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_string(dims_));
    }
  }

  static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

  static Tensor vector(std::initializer_list<T> values) {
    return Tensor(Shape{values.size()}, std::vector<T>(values));
  }

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }

  /// Leading extent, and the number of elements per leading index.
  std::size_t rows() const noexcept { return dims_.front(); }
  std::size_t row_size() const noexcept { return data_.size() / dims_.front(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  std::span<const T> row(std::size_t r) const {
    return std::span<const T>(data_).subspan(r * row_size(), row_size());
  }
  std::span<T> row(std::size_t r) { return std::span<T>(data_).subspan(r * row_size(), row_size()); }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T item() const {
    if (data_.size() != 1) throw ConfigError("item() on tensor of shape " + shape_string(dims_));
    return data_[0];
  }

  Tensor reshaped(Shape dims) const {
    if (shape_size(dims) != data_.size()) {
      throw ConfigError("cannot reshape " + shape_string(dims_) + " to " + shape_string(dims));
    }
    return Tensor(std::move(dims), data_);
  }

  /// Copy of `count` consecutive leading-index rows starting at `start`.
  Tensor slice_rows(std::size_t start, std::size_t count) const {
    if (count == 0 || start + count > rows()) {
      throw ConfigError("slice_rows [" + std::to_string(start) + ", +" + std::to_string(count) +
                        ") out of range for " + shape_string(dims_));
    }
    Shape d = dims_;
    d[0] = count;
    const auto first = data_.begin() + static_cast<std::ptrdiff_t>(start * row_size());
    return Tensor(std::move(d), std::vector<T>(first, first + static_cast<std::ptrdiff_t>(count * row_size())));
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return Tensor<U>(dims_, std::move(out));
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  void validate_dims() const {
    if (dims_.empty()) throw ConfigError("tensor must have at least one extent");
    for (auto d : dims_) {
      if (d == 0) throw ConfigError("tensor extents must be >= 1, got " + shape_string(dims_));
    }
  }

  Shape dims_;
  std::vector<T> data_;
};

template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.size() != b.size()) throw ConfigError("dot of mismatched tensors");
  T s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.size() != b.size()) throw ConfigError("max_abs_diff of mismatched tensors");
  T m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace dsvae
