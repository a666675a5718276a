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

// One-class Gaussian anomaly detector over bonafide embeddings.
//
// Checkpoint: "PSGM" | version u16 | dim u32 | mean dim x f64 |
// covariance dim*dim x f64 (row-major), little-endian.

#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "protospoof/binary_io.hpp"
#include "protospoof/error.hpp"
#include "protospoof/numkernel/tensor.hpp"

namespace protospoof {

inline constexpr double kDefaultShrinkage = 0.1;
inline constexpr double kVarianceFloor = 1e-6;

/// Lower-triangular L with a = L L^T. Throws ConditioningError on a
/// non-positive pivot.
inline Tensor2 cholesky(const Tensor2& a) {
  if (a.rows() != a.cols()) throw DimensionError("cholesky of non-square matrix " + a.shape());
  const std::size_t n = a.rows();
  Tensor2 l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d))
      throw ConditioningError("covariance is not positive definite (pivot " + std::to_string(j) + " = " +
                              std::to_string(d) + "); increase the shrinkage");
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

struct GaussianModel {
  std::vector<double> mean;
  Tensor2 covariance;
  double shrinkage = kDefaultShrinkage;
  Tensor2 factor;  // Cholesky factor of covariance

  std::size_t dim() const noexcept { return mean.size(); }

  static GaussianModel from_moments(std::vector<double> mean, Tensor2 covariance, double shrinkage) {
    if (covariance.rows() != mean.size() || covariance.cols() != mean.size())
      throw DimensionError("covariance " + covariance.shape() + " does not match mean length " +
                           std::to_string(mean.size()));
    GaussianModel g{std::move(mean), std::move(covariance), shrinkage, {}};
    g.factor = cholesky(g.covariance);
    return g;
  }
};

/// Sample mean and shrunk sample covariance (n - 1 denominator):
/// (1 - lambda) S + lambda diag(var + floor).
inline GaussianModel fit_gaussian(const Tensor2& x, double shrinkage = kDefaultShrinkage,
                                  double floor = kVarianceFloor) {
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) throw ConfigError("shrinkage must lie in [0, 1]");
  const std::size_t n = x.rows(), d = x.cols();
  if (n < 2) throw ValidationError("fit_gaussian needs at least 2 samples, got " + std::to_string(n));
  std::vector<double> mu(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mu[j] += x(i, j);
  for (double& m : mu) m /= static_cast<double>(n);

  Tensor2 s(d, d);
  std::vector<double> c(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) c[j] = x(i, j) - mu[j];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) s(a, b) += c[a] * c[b];
  }
  const double denom = static_cast<double>(n - 1);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      const double v = s(a, b) / denom;
      const double shrunk = a == b ? (1.0 - shrinkage) * v + shrinkage * (v + floor) : (1.0 - shrinkage) * v;
      s(a, b) = shrunk;
      s(b, a) = shrunk;
    }
  return GaussianModel::from_moments(std::move(mu), std::move(s), shrinkage);
}

/// sqrt((x - mu)^T Sigma^-1 (x - mu)) by forward substitution with the
/// cached factor. Larger means more anomalous.
inline double mahalanobis_score(const GaussianModel& g, std::span<const double> x) {
  const std::size_t d = g.dim();
  if (x.size() != d)
    throw DimensionError("mahalanobis_score: input length " + std::to_string(x.size()) + ", model dimension " +
                         std::to_string(d));
  std::vector<double> y(d);
  double sq = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double s = x[i] - g.mean[i];
    for (std::size_t k = 0; k < i; ++k) s -= g.factor(i, k) * y[k];
    y[i] = s / g.factor(i, i);
    sq += y[i] * y[i];
  }
  return std::sqrt(sq);
}

inline std::vector<double> mahalanobis_scores(const GaussianModel& g, const Tensor2& x) {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = mahalanobis_score(g, x.row(i));
  return out;
}

inline constexpr std::string_view kGaussianMagic = "PSGM";
inline constexpr std::uint16_t kGaussianVersion = 1;

inline std::string encode_gaussian(const GaussianModel& g) {
  io::ByteWriter w;
  w.bytes(kGaussianMagic);
  w.uint(kGaussianVersion);
  w.uint(static_cast<std::uint32_t>(g.dim()));
  for (double v : g.mean) w.f64(v);
  for (double v : g.covariance.data()) w.f64(v);
  return w.buffer();
}

/// The shrinkage is not stored; the loaded model reports `shrinkage`.
inline GaussianModel decode_gaussian(std::string_view bytes, double shrinkage = kDefaultShrinkage) {
  io::ByteReader r(bytes);
  std::string magic;
  if (!r.bytes(4, magic) || magic != kGaussianMagic) throw FormatError("not a Gaussian model (bad magic)");
  std::uint16_t version = 0;
  std::uint32_t dim = 0;
  if (!r.uint(version)) throw FormatError("truncated Gaussian model header");
  if (version != kGaussianVersion) throw FormatError("unsupported Gaussian model version " + std::to_string(version));
  if (!r.uint(dim)) throw FormatError("truncated Gaussian model header");
  const std::uint64_t need = (static_cast<std::uint64_t>(dim) + static_cast<std::uint64_t>(dim) * dim) * 8;
  if (r.remaining() != need) throw CorruptRecordError("Gaussian model body has the wrong length");
  std::vector<double> mu(dim);
  for (double& v : mu) r.f64(v);
  Tensor2 cov(dim, dim);
  for (double& v : cov.data()) r.f64(v);
  return GaussianModel::from_moments(std::move(mu), std::move(cov), shrinkage);
}

inline void save_gaussian(const GaussianModel& g, const std::filesystem::path& path) {
  io::write_file(path, encode_gaussian(g));
}

inline GaussianModel load_gaussian(const std::filesystem::path& path) { return decode_gaussian(io::read_file(path)); }

}  // namespace protospoof
