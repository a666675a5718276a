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

// Synthetic embedding generator with controlled distribution shift.
//
// Source: bonafide plus `families` spoof families, each an isotropic plus
// low-rank Gaussian. Family offsets from the bonafide mean share a common
// "spoof" direction and add a family-specific one. Target: bonafide plus
// one held-out family, whose offset is only partly aligned with the common
// direction, after the shift operators (noise scaling, rotation by a fixed
// angle, translation) are applied to both classes.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "protospoof/config_text.hpp"
#include "protospoof/episodes/dataset.hpp"
#include "protospoof/rng.hpp"

namespace protospoof {

/// Defaults describe the moderate-shift benchmark. Under null_shift() the
/// target bonafide class is distributed like the source one.
struct ShiftSpec {
  // [data]
  std::size_t dim = 32;
  std::uint64_t seed = 1;
  std::size_t families = 4;
  std::size_t source_per_class = 600;
  std::size_t target_per_class = 1000;
  // [clusters]
  double separation = 3.0;
  double common_fraction = 0.5;
  double heldout_alignment = 0.3;
  double heldout_novelty = 0.0;
  double noise = 1.0;
  std::size_t low_rank = 2;
  double low_rank_scale = 1.0;
  std::vector<double> family_scales;  // bonafide, families..., held-out; empty = all 1
  double outlier_rate = 0.15;
  double outlier_scale = 4.0;
  // [shift]; defaults give the moderate benchmark shift
  double translation = 1.0;
  double rotation_deg = 30.0;
  double cov_scale = 1.2;
  double label_noise = 0.0;

  friend bool operator==(const ShiftSpec&, const ShiftSpec&) = default;
};

/// Copy of `s` with every shift operator disabled.
inline ShiftSpec null_shift(ShiftSpec s) {
  s.translation = 0.0;
  s.rotation_deg = 0.0;
  s.cov_scale = 1.0;
  s.label_noise = 0.0;
  return s;
}

/// Key table shared by the parser, the serializer and the docs.
struct ShiftKey {
  const char* key;
  const char* doc;
};

inline constexpr ShiftKey kShiftKeys[] = {
    {"data.dim", "embedding dimension (>= families + 2)"},
    {"data.seed", "generator seed; fully determines the output"},
    {"data.families", "number of source spoof families (>= 1)"},
    {"data.source_per_class", "records per class in the source set"},
    {"data.target_per_class", "records per class in the target set"},
    {"clusters.separation", "distance of every spoof family mean from the bonafide mean"},
    {"clusters.common_fraction", "share (0..1) of each family offset lying on the common spoof direction"},
    {"clusters.heldout_alignment", "cosine (-1..1) between the held-out offset and the common direction"},
    {"clusters.heldout_novelty", "share (0..1) of the remaining held-out offset outside all source directions"},
    {"clusters.noise", "isotropic standard deviation"},
    {"clusters.low_rank", "rank of the per-class low-rank covariance term"},
    {"clusters.low_rank_scale", "standard deviation along the low-rank directions"},
    {"clusters.family_scales", "comma list of covariance scales: bonafide, source families, held-out"},
    {"clusters.outlier_rate", "fraction (0..1) of records drawn as atypical: class mean plus broad isotropic noise"},
    {"clusters.outlier_scale", "standard deviation of atypical records, in units of clusters.noise"},
    {"shift.translation", "target translation magnitude along a seeded unit direction"},
    {"shift.rotation_deg", "rotation angle applied to every target vector"},
    {"shift.cov_scale", "multiplier on within-class spread in the target"},
    {"shift.label_noise", "fraction (0..1) of target records whose label is flipped"},
};

inline void validate(const ShiftSpec& s) {
  auto nonneg = [](double v, const char* name) {
    if (!(std::isfinite(v) && v >= 0.0)) throw ConfigError(std::string(name) + " must be finite and non-negative");
  };
  if (s.families == 0) throw ConfigError("data.families must be at least 1");
  if (s.dim < s.families + 2)
    throw ConfigError("data.dim must be at least families + 2 (" + std::to_string(s.families + 2) + ")");
  if (s.low_rank > s.dim) throw ConfigError("clusters.low_rank exceeds data.dim");
  nonneg(s.separation, "clusters.separation");
  nonneg(s.noise, "clusters.noise");
  nonneg(s.low_rank_scale, "clusters.low_rank_scale");
  nonneg(s.translation, "shift.translation");
  nonneg(s.rotation_deg, "shift.rotation_deg");
  nonneg(s.cov_scale, "shift.cov_scale");
  if (!(s.common_fraction >= 0.0 && s.common_fraction <= 1.0))
    throw ConfigError("clusters.common_fraction must lie in [0, 1]");
  if (!(s.heldout_novelty >= 0.0 && s.heldout_novelty <= 1.0))
    throw ConfigError("clusters.heldout_novelty must lie in [0, 1]");
  if (!(s.heldout_alignment >= -1.0 && s.heldout_alignment <= 1.0))
    throw ConfigError("clusters.heldout_alignment must lie in [-1, 1]");
  if (!(s.label_noise >= 0.0 && s.label_noise <= 1.0)) throw ConfigError("shift.label_noise must lie in [0, 1]");
  if (!(s.outlier_rate >= 0.0 && s.outlier_rate <= 1.0)) throw ConfigError("clusters.outlier_rate must lie in [0, 1]");
  nonneg(s.outlier_scale, "clusters.outlier_scale");
  if (!s.family_scales.empty()) {
    if (s.family_scales.size() != s.families + 2)
      throw ConfigError("clusters.family_scales needs " + std::to_string(s.families + 2) + " entries");
    for (double v : s.family_scales) nonneg(v, "clusters.family_scales");
  }
}

/// Non-fatal findings, e.g. classes too small for the intended episodes.
inline std::vector<std::string> shift_warnings(const ShiftSpec& s, std::size_t min_per_class) {
  std::vector<std::string> w;
  if (s.source_per_class < min_per_class)
    w.push_back("source_per_class " + std::to_string(s.source_per_class) + " is below " + std::to_string(min_per_class));
  if (s.target_per_class < min_per_class)
    w.push_back("target_per_class " + std::to_string(s.target_per_class) + " is below " + std::to_string(min_per_class));
  return w;
}

inline ShiftSpec parse_shift_spec(std::string_view text) {
  const config::Document doc = config::parse(text);
  ShiftSpec s;
  using Setter = std::function<void(const std::string&, const config::Entry&)>;
  const std::map<std::string, Setter> setters = {
      {"data.dim", [&](auto& k, auto& e) { s.dim = config::to_uint(k, e); }},
      {"data.seed", [&](auto& k, auto& e) { s.seed = config::to_uint(k, e); }},
      {"data.families", [&](auto& k, auto& e) { s.families = config::to_uint(k, e); }},
      {"data.source_per_class", [&](auto& k, auto& e) { s.source_per_class = config::to_uint(k, e); }},
      {"data.target_per_class", [&](auto& k, auto& e) { s.target_per_class = config::to_uint(k, e); }},
      {"clusters.separation", [&](auto& k, auto& e) { s.separation = config::to_double(k, e); }},
      {"clusters.common_fraction", [&](auto& k, auto& e) { s.common_fraction = config::to_double(k, e); }},
      {"clusters.heldout_alignment", [&](auto& k, auto& e) { s.heldout_alignment = config::to_double(k, e); }},
      {"clusters.heldout_novelty", [&](auto& k, auto& e) { s.heldout_novelty = config::to_double(k, e); }},
      {"clusters.noise", [&](auto& k, auto& e) { s.noise = config::to_double(k, e); }},
      {"clusters.low_rank", [&](auto& k, auto& e) { s.low_rank = config::to_uint(k, e); }},
      {"clusters.low_rank_scale", [&](auto& k, auto& e) { s.low_rank_scale = config::to_double(k, e); }},
      {"clusters.family_scales", [&](auto& k, auto& e) { s.family_scales = config::to_double_list(k, e); }},
      {"clusters.outlier_rate", [&](auto& k, auto& e) { s.outlier_rate = config::to_double(k, e); }},
      {"clusters.outlier_scale", [&](auto& k, auto& e) { s.outlier_scale = config::to_double(k, e); }},
      {"shift.translation", [&](auto& k, auto& e) { s.translation = config::to_double(k, e); }},
      {"shift.rotation_deg", [&](auto& k, auto& e) { s.rotation_deg = config::to_double(k, e); }},
      {"shift.cov_scale", [&](auto& k, auto& e) { s.cov_scale = config::to_double(k, e); }},
      {"shift.label_noise", [&](auto& k, auto& e) { s.label_noise = config::to_double(k, e); }},
  };
  for (const auto& [key, entry] : doc) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("line " + std::to_string(entry.line) + ": unknown key '" + key + "'");
    it->second(key, entry);
  }
  validate(s);
  return s;
}

namespace detail {

/// Shortest decimal text that reads back to the same double.
inline std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace detail

inline std::string to_text(const ShiftSpec& s) {
  std::ostringstream o;
  o << "[data]\n"
    << "dim = " << s.dim << "\n"
    << "seed = " << s.seed << "\n"
    << "families = " << s.families << "\n"
    << "source_per_class = " << s.source_per_class << "\n"
    << "target_per_class = " << s.target_per_class << "\n\n"
    << "[clusters]\n"
    << "separation = " << detail::shortest(s.separation) << "\n"
    << "common_fraction = " << detail::shortest(s.common_fraction) << "\n"
    << "heldout_alignment = " << detail::shortest(s.heldout_alignment) << "\n"
    << "heldout_novelty = " << detail::shortest(s.heldout_novelty) << "\n"
    << "noise = " << detail::shortest(s.noise) << "\n"
    << "low_rank = " << s.low_rank << "\n"
    << "low_rank_scale = " << detail::shortest(s.low_rank_scale) << "\n";
  if (!s.family_scales.empty()) {
    o << "family_scales = ";
    for (std::size_t i = 0; i < s.family_scales.size(); ++i) o << (i ? ", " : "") << detail::shortest(s.family_scales[i]);
    o << "\n";
  }
  o << "outlier_rate = " << detail::shortest(s.outlier_rate) << "\n"
    << "outlier_scale = " << detail::shortest(s.outlier_scale) << "\n";
  o << "\n[shift]\n"
    << "translation = " << detail::shortest(s.translation) << "\n"
    << "rotation_deg = " << detail::shortest(s.rotation_deg) << "\n"
    << "cov_scale = " << detail::shortest(s.cov_scale) << "\n"
    << "label_noise = " << detail::shortest(s.label_noise) << "\n";
  return o.str();
}

inline std::string spoof_family_label(std::size_t f) { return "spoof_" + std::to_string(f); }

/// Everything the generator derives from the seed before sampling.
struct ShiftGeometry {
  std::vector<std::vector<double>> means;       // bonafide, families..., held-out
  std::vector<std::vector<double>> factors;     // per class, dim x low_rank row-major
  std::vector<double> scales;                   // per class
  std::vector<double> translation_direction;    // unit
  std::vector<std::vector<double>> rotation_basis;  // orthonormal rows; pairs rotated
};

namespace detail {

inline std::vector<std::vector<double>> random_orthonormal(Rng& rng, std::size_t count, std::size_t dim) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < count) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) dot += v[i] * b[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * b[i];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-8) continue;
    for (double& x : v) x /= n;
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace detail

inline ShiftGeometry shift_geometry(const ShiftSpec& s) {
  validate(s);
  Rng rng(derive_seed(s.seed, {0x9e0u}));
  const std::size_t d = s.dim, F = s.families;
  const auto basis = detail::random_orthonormal(rng, F + 2, d);
  const auto& common = basis[0];
  const auto& novel = basis[F + 1];

  ShiftGeometry g;
  g.means.push_back(std::vector<double>(d, 0.0));
  const double a = std::sqrt(s.common_fraction), b = std::sqrt(1.0 - s.common_fraction);
  for (std::size_t f = 0; f < F; ++f) {
    std::vector<double> m(d);
    for (std::size_t i = 0; i < d; ++i) m[i] = s.separation * (a * common[i] + b * basis[f + 1][i]);
    g.means.push_back(std::move(m));
  }
  // Held-out: mixture of source family directions plus a novel one.
  std::vector<double> mix(d, 0.0);
  for (std::size_t f = 0; f < F; ++f) {
    const double w = rng.normal();
    for (std::size_t i = 0; i < d; ++i) mix[i] += w * basis[f + 1][i];
  }
  double mn = 0.0;
  for (double x : mix) mn += x * x;
  mn = std::sqrt(mn);
  for (double& x : mix) x = mn > 0.0 ? x / mn : 0.0;
  const double h = s.heldout_alignment, rest = std::sqrt(1.0 - h * h);
  const double nov = std::sqrt(s.heldout_novelty), old = std::sqrt(1.0 - s.heldout_novelty);
  std::vector<double> held(d);
  for (std::size_t i = 0; i < d; ++i)
    held[i] = s.separation * (h * common[i] + rest * (old * mix[i] + nov * novel[i]));
  g.means.push_back(std::move(held));

  const std::size_t classes = F + 2;
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<double> fac(d * s.low_rank, 0.0);
    if (s.low_rank > 0) {
      const auto cols = detail::random_orthonormal(rng, s.low_rank, d);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t r = 0; r < s.low_rank; ++r) fac[i * s.low_rank + r] = cols[r][i];
    }
    g.factors.push_back(std::move(fac));
    g.scales.push_back(s.family_scales.empty() ? 1.0 : s.family_scales[c]);
  }
  g.translation_direction = detail::random_orthonormal(rng, 1, d).front();
  g.rotation_basis = detail::random_orthonormal(rng, d, d);
  return g;
}

/// Rotates every pair (basis[2i], basis[2i+1]) by `radians`; with an even
/// dimension every vector turns by exactly that angle.
inline std::vector<double> rotate(const ShiftGeometry& g, std::span<const double> x, double radians) {
  const std::size_t d = x.size();
  std::vector<double> coord(d);
  for (std::size_t k = 0; k < d; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += g.rotation_basis[k][i] * x[i];
    coord[k] = s;
  }
  const double c = std::cos(radians), sn = std::sin(radians);
  for (std::size_t k = 0; k + 1 < d; k += 2) {
    const double u = coord[k], v = coord[k + 1];
    coord[k] = c * u - sn * v;
    coord[k + 1] = sn * u + c * v;
  }
  std::vector<double> out(d, 0.0);
  for (std::size_t k = 0; k < d; ++k)
    for (std::size_t i = 0; i < d; ++i) out[i] += coord[k] * g.rotation_basis[k][i];
  return out;
}

struct ShiftedData {
  EmbeddingDataset source;
  EmbeddingDataset target;
};

inline ShiftedData generate_shifted(const ShiftSpec& s) {
  const ShiftGeometry g = shift_geometry(s);
  const std::size_t d = s.dim, F = s.families;
  Rng rng(derive_seed(s.seed, {0x5a3u}));

  auto draw = [&](std::size_t cls, double spread) {
    std::vector<double> x = g.means[cls];
    const double sc = g.scales[cls] * spread;
    if (s.outlier_rate > 0.0 && rng.uniform() < s.outlier_rate) {
      for (std::size_t i = 0; i < d; ++i) x[i] += sc * s.outlier_scale * s.noise * rng.normal();
      return x;
    }
    for (std::size_t i = 0; i < d; ++i) x[i] += sc * s.noise * rng.normal();
    for (std::size_t r = 0; r < s.low_rank; ++r) {
      const double m = rng.normal() * s.low_rank_scale * sc;
      for (std::size_t i = 0; i < d; ++i) x[i] += m * g.factors[cls][i * s.low_rank + r];
    }
    return x;
  };
  auto to_f32 = [](const std::vector<double>& x) { return std::vector<float>(x.begin(), x.end()); };
  auto make_id = [](const char* prefix, std::size_t n) {
    std::string num = std::to_string(n);
    return std::string(prefix) + std::string(num.size() < 6 ? 6 - num.size() : 0, '0') + num;
  };

  ShiftedData out{EmbeddingDataset(d), EmbeddingDataset(d)};
  std::size_t n = 0;
  for (std::size_t cls = 0; cls <= F; ++cls) {
    const std::string label = cls == 0 ? std::string(kBonafide) : spoof_family_label(cls - 1);
    for (std::size_t i = 0; i < s.source_per_class; ++i)
      out.source.add({make_id("src-", n++), label, "source", to_f32(draw(cls, 1.0))});
  }

  const double theta = s.rotation_deg * std::numbers::pi / 180.0;
  const std::string heldout = spoof_family_label(F);
  n = 0;
  for (std::size_t cls : {std::size_t{0}, F + 1}) {
    const std::string label = cls == 0 ? std::string(kBonafide) : heldout;
    const std::string other = cls == 0 ? heldout : std::string(kBonafide);
    for (std::size_t i = 0; i < s.target_per_class; ++i) {
      std::vector<double> x = rotate(g, draw(cls, s.cov_scale), theta);
      for (std::size_t j = 0; j < d; ++j) x[j] += s.translation * g.translation_direction[j];
      const bool flip = s.label_noise > 0.0 && rng.uniform() < s.label_noise;
      out.target.add({make_id("tgt-", n++), flip ? other : label, "target", to_f32(x)});
    }
  }
  return out;
}

}  // namespace protospoof
