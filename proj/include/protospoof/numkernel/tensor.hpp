// Copyright 2026 The protospoof Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "protospoof/error.hpp"

namespace protospoof {

/// Dense row-major matrix of doubles. Vectors are 1 x n rows.
class Tensor2 {
 public:
  Tensor2() = default;

  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw DimensionError("buffer of " + std::to_string(data_.size()) + " values cannot be shaped (" +
                           std::to_string(rows) + "," + std::to_string(cols) + ")");
  }

  Tensor2(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionError("ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Tensor2 row_vector(std::span<const double> values) {
    return Tensor2(1, values.size(), std::vector<double>(values.begin(), values.end()));
  }

  static Tensor2 identity(std::size_t n) {
    Tensor2 t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Tensor2& operator+=(const Tensor2& other) {
    require_same_shape(other, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  bool same_shape(const Tensor2& other) const noexcept { return rows_ == other.rows_ && cols_ == other.cols_; }

  void require_same_shape(const Tensor2& other, const char* what) const {
    if (!same_shape(other))
      throw DimensionError(std::string(what) + ": shapes " + shape() + " and " + other.shape() + " differ");
  }

  std::string shape() const { return "(" + std::to_string(rows_) + "," + std::to_string(cols_) + ")"; }

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Copies the given rows of `src`, in order, into a new tensor.
inline Tensor2 select_rows(const Tensor2& src, std::span<const std::size_t> indices) {
  Tensor2 out(indices.size(), src.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto r = src.row(indices[i]);
    std::copy(r.begin(), r.end(), out.row(i).begin());
  }
  return out;
}

inline double max_abs_diff(const Tensor2& a, const Tensor2& b) {
  a.require_same_shape(b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace protospoof
