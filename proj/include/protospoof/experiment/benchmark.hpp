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

// Method runners over one synthetic shift benchmark. Each runner returns an
// EvalReport; k-independent methods report k = 0.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "protospoof/baselines/finetune.hpp"
#include "protospoof/baselines/gaussian.hpp"
#include "protospoof/baselines/probe.hpp"
#include "protospoof/episodes/shift.hpp"
#include "protospoof/metrics/evaluate.hpp"
#include "protospoof/trainer/trainer.hpp"

namespace protospoof {

/// The four files of one benchmark dataset.
struct BenchmarkSplits {
  std::string name;
  EmbeddingDataset train;   // source, episodic training
  EmbeddingDataset valid;   // source, model selection
  EmbeddingDataset adapt;   // target, support / fine-tuning draws
  EmbeddingDataset trials;  // target, scored trial list
};

inline constexpr double kTrainFraction = 0.8;
inline constexpr double kAdaptFraction = 0.3;

inline BenchmarkSplits make_splits(const ShiftedData& data, std::string name, std::uint64_t seed) {
  DatasetSplit src = split_stratified(data.source, kTrainFraction, derive_seed(seed, {0xd1u}));
  DatasetSplit tgt = split_stratified(data.target, kAdaptFraction, derive_seed(seed, {0xd2u}));
  return BenchmarkSplits{std::move(name), std::move(src.first), std::move(src.second), std::move(tgt.first),
                         std::move(tgt.second)};
}

inline BenchmarkSplits make_benchmark(const ShiftSpec& spec, std::string name) {
  return make_splits(generate_shifted(spec), std::move(name), spec.seed);
}

inline constexpr std::string_view kMethodNames[] = {"zeroshot",      "mahalanobis", "protonet-mean",
                                                    "protonet-attn", "finetune-10", "finetune-100"};

inline bool is_method(std::string_view m) {
  for (auto n : kMethodNames)
    if (n == m) return true;
  return false;
}

/// Methods whose result does not depend on the support size k.
inline bool k_independent(std::string_view m) { return m != "protonet-mean" && m != "protonet-attn"; }

inline EvalReport single_run_report(std::string dataset, std::string method, double eer_value, std::uint64_t seed) {
  EvalReport r;
  r.dataset = std::move(dataset);
  r.method = std::move(method);
  r.aggregation = "none";
  r.objective = "binary";
  r.k = 0;
  r.seed = seed;
  r.per_run_eer = {eer_value};
  summarize(r);
  return r;
}

inline ProbeModel train_zero_shot(const BenchmarkSplits& b, std::uint64_t seed) {
  ProbeConfig c;
  c.seed = seed;
  return train_probe(b.train, c);
}

inline EvalReport zero_shot_report(const ProbeModel& probe, const BenchmarkSplits& b, std::uint64_t seed) {
  const TrialSet t = trial_set(b.trials);
  return single_run_report(b.name, "zeroshot", eer(probe.scores(t.rows), t.fake), seed);
}

/// Gaussian fitted to the bonafide records of the source training split.
inline EvalReport mahalanobis_report(const BenchmarkSplits& b, std::uint64_t seed,
                                     double shrinkage = kDefaultShrinkage) {
  const GaussianModel g = fit_gaussian(b.train.rows(b.train.indices_of(kBonafide)), shrinkage);
  const TrialSet t = trial_set(b.trials);
  return single_run_report(b.name, "mahalanobis", eer(mahalanobis_scores(g, t.rows), t.fake), seed);
}

inline EvalReport fewshot_report(const FewShotModel& model, const BenchmarkSplits& b, std::size_t k, std::size_t runs,
                                 std::uint64_t seed, SupportCorruption corruption = {}) {
  FewShotEvalOptions opt;
  opt.k = k;
  opt.runs = runs;
  opt.seed = seed;
  opt.dataset = b.name;
  opt.corruption = corruption;
  const char* method = model.config().aggregation == Aggregation::mean ? "protonet-mean" : "protonet-attn";
  return evaluate_fewshot(model, b.adapt, b.trials, opt, method);
}

/// Fine-tunes the prototype-head classifier derived from `base` on
/// `n_per_class` adaptation records per class, once per preset repeat.
inline EvalReport finetune_report(const FewShotModel& base, const BenchmarkSplits& b, std::size_t n_per_class,
                                  std::uint64_t seed) {
  const FinetuneConfig cfg = FinetuneConfig::preset(n_per_class);
  const TrialSet t = trial_set(b.trials);
  EvalReport r;
  r.dataset = b.name;
  r.method = "finetune-" + std::to_string(n_per_class);
  r.aggregation = std::string(to_string(base.config().aggregation));
  r.objective = "binary";
  r.k = 0;
  r.seed = seed;
  for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
    const SupportSet s = support_draw(b.adapt, Objective::binary, n_per_class, rep, derive_seed(seed, {0xf7u}));
    std::vector<std::size_t> idx;
    for (const auto& cls : s.indices) idx.insert(idx.end(), cls.begin(), cls.end());
    const EmbeddingDataset sample = b.adapt.subset(idx);
    auto result = finetune_adapt(PrototypeHeadClassifier(base), sample, cfg, derive_seed(seed, {0xf8u, rep}));
    r.per_run_eer.push_back(eer(result.model.scores(t.rows), t.fake));
  }
  summarize(r);
  return r;
}

}  // namespace protospoof
