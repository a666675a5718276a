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

// Equal error rate over scored trials; higher score = more likely fake.
//
// Operating points are the distinct scores in ascending order followed by
// +inf. At threshold t a bonafide trial is falsely accepted when its score
// is >= t and a fake trial is falsely rejected when its score is < t. The
// rates cross between two adjacent points; the result is the linear
// interpolation there, evaluated from integer counts with one final
// division so that equivalent inputs give bit-identical results.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "protospoof/error.hpp"

namespace protospoof {

struct Trial {
  std::string id;
  double score = 0.0;
  bool fake = false;
};

namespace detail {

struct ScoredLabel {
  double score;
  bool fake;
};

// One correctly rounded division, then scaling.
inline double percent(std::int64_t num, std::int64_t den) {
  return 100.0 * (static_cast<double>(num) / static_cast<double>(den));
}

inline double eer_sorted(std::vector<ScoredLabel>& v) {
  std::int64_t nb = 0, nf = 0;
  for (const auto& s : v) {
    if (!std::isfinite(s.score)) throw ValidationError("eer: non-finite trial score");
    (s.fake ? nf : nb) += 1;
  }
  if (nb == 0 || nf == 0) throw ValidationError("eer needs at least one bonafide and one fake trial");
  std::sort(v.begin(), v.end(), [](const ScoredLabel& a, const ScoredLabel& b) { return a.score < b.score; });

  // (fa, fr) at the current operating point, starting at the lowest score.
  // Consuming one group of tied scores moves to the next point; after the
  // last group the point is +inf, where fa = 0 and fr = nf.
  std::int64_t fa = nb, fr = 0;
  std::size_t i = 0;
  while (true) {
    std::int64_t fa_next = fa, fr_next = fr;
    const double t = v[i].score;
    for (; i < v.size() && v[i].score == t; ++i) {
      if (v[i].fake) ++fr_next;
      else --fa_next;
    }
    const std::int64_t d_next = fa_next * nf - fr_next * nb;
    if (d_next == 0) return percent(fa_next, nb);
    if (d_next < 0) {
      const std::int64_t num = fa * fr_next - fa_next * fr;
      const std::int64_t den = nf * (fa - fa_next) + nb * (fr_next - fr);
      return percent(num, den);
    }
    fa = fa_next;
    fr = fr_next;
  }
}

}  // namespace detail

/// EER in percent.
inline double eer(std::span<const Trial> trials) {
  std::vector<detail::ScoredLabel> v;
  v.reserve(trials.size());
  for (const auto& t : trials) v.push_back({t.score, t.fake});
  return detail::eer_sorted(v);
}

/// EER in percent from parallel score / truth arrays.
inline double eer(std::span<const double> scores, std::span<const char> fake) {
  if (scores.size() != fake.size()) throw DimensionError("eer: score and label counts differ");
  std::vector<detail::ScoredLabel> v;
  v.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) v.push_back({scores[i], fake[i] != 0});
  return detail::eer_sorted(v);
}

}  // namespace protospoof
