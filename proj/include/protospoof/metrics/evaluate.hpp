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

// Repeated-support evaluation of few-shot models on a fixed trial list.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "protospoof/episodes/sampler.hpp"
#include "protospoof/metrics/eer.hpp"
#include "protospoof/metrics/report.hpp"
#include "protospoof/protonet/protonet.hpp"

namespace protospoof {

/// Replaces a fraction of every class's support rows with gross outliers:
/// adaptation-set mean plus `scale` times the per-dimension adaptation
/// standard deviation times standard normal noise.
struct SupportCorruption {
  double fraction = 0.0;
  double scale = 3.0;
};

struct FewShotEvalOptions {
  std::size_t k = 5;
  std::size_t runs = 100;
  std::uint64_t seed = 0;
  std::string dataset;
  SupportCorruption corruption;
};

struct TrialSet {
  Tensor2 rows;
  std::vector<char> fake;
};

inline TrialSet trial_set(const EmbeddingDataset& trials) {
  trials.validate_for_training("trial set");
  TrialSet t{trials.all_rows(), std::vector<char>(trials.size())};
  for (std::size_t i = 0; i < trials.size(); ++i) t.fake[i] = is_spoof_label(trials[i].label) ? 1 : 0;
  return t;
}

namespace detail {

struct ColumnMoments {
  std::vector<double> mean, sd;
};

inline ColumnMoments column_moments(const Tensor2& x) {
  ColumnMoments m{std::vector<double>(x.cols(), 0.0), std::vector<double>(x.cols(), 0.0)};
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) m.mean[j] += x(i, j);
  for (double& v : m.mean) v /= static_cast<double>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) m.sd[j] += (x(i, j) - m.mean[j]) * (x(i, j) - m.mean[j]);
  for (double& v : m.sd) v = std::sqrt(v / static_cast<double>(x.rows()));
  return m;
}

}  // namespace detail

/// Number of corrupted rows in a support of size k.
inline std::size_t corrupted_count(std::size_t k, double fraction) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(k)));
}

/// Raw support rows of one run, corrupted if requested. The outlier draw is
/// seeded from (seed, run) alone.
inline std::vector<Tensor2> support_rows(const EmbeddingDataset& adapt, const SupportSet& s,
                                         const SupportCorruption& corruption, std::uint64_t seed, std::uint64_t run) {
  std::vector<Tensor2> out;
  out.reserve(s.indices.size());
  for (const auto& idx : s.indices) out.push_back(adapt.rows(idx));
  if (corruption.fraction <= 0.0) return out;
  if (corruption.fraction > 1.0) throw ConfigError("corruption fraction must lie in [0, 1]");
  const detail::ColumnMoments m = detail::column_moments(adapt.all_rows());
  Rng rng(derive_seed(seed, {0xc0u, run}));
  for (Tensor2& rows : out) {
    const std::size_t n = corrupted_count(rows.rows(), corruption.fraction);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < rows.cols(); ++j) rows(i, j) = m.mean[j] + corruption.scale * m.sd[j] * rng.normal();
  }
  return out;
}

/// EER of one run: support drawn for (seed, run), prototypes built with the
/// model's aggregation, every trial scored.
inline double fewshot_run_eer(const FewShotModel& model, const EmbeddingDataset& adapt, const Tensor2& embedded_trials,
                              std::span<const char> fake, const FewShotEvalOptions& opt, std::uint64_t run) {
  const SupportSet s = support_draw(adapt, model.config().objective, opt.k, run, opt.seed);
  const auto rows = support_rows(adapt, s, opt.corruption, opt.seed, run);
  std::vector<Prototype> protos;
  for (std::size_t c = 0; c < rows.size(); ++c)
    protos.push_back(build_prototype(model, embed(model, rows[c]), s.labels[c]));
  const auto scores = score_batch(model, protos, embedded_trials);
  return eer(scores, fake);
}

inline EvalReport evaluate_fewshot(const FewShotModel& model, const EmbeddingDataset& adapt,
                                   const EmbeddingDataset& trials, const FewShotEvalOptions& opt,
                                   std::string method = "fewshot") {
  if (opt.runs == 0) throw ConfigError("evaluation needs at least one run");
  adapt.validate_for_training("adaptation set");
  if (adapt.dim() != model.dim() || trials.dim() != model.dim())
    throw DimensionError("dataset dimension does not match model dimension " + std::to_string(model.dim()));
  const TrialSet t = trial_set(trials);
  const Tensor2 embedded = embed(model, t.rows);
  EvalReport r;
  r.dataset = opt.dataset;
  r.method = std::move(method);
  r.aggregation = std::string(to_string(model.config().aggregation));
  r.objective = std::string(to_string(model.config().objective));
  r.k = opt.k;
  r.seed = opt.seed;
  for (std::size_t run = 0; run < opt.runs; ++run)
    r.per_run_eer.push_back(fewshot_run_eer(model, adapt, embedded, t.fake, opt, run));
  summarize(r);
  return r;
}

}  // namespace protospoof
