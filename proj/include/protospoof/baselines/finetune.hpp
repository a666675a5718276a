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

// Supervised adaptation of a binary classifier on a small labelled
// in-domain sample, with a stratified holdout for per-epoch early stopping.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "protospoof/baselines/probe.hpp"
#include "protospoof/episodes/sampler.hpp"

namespace protospoof {

template <class C>
concept BinaryClassifier = std::copy_constructible<C> && requires(C c, const C cc, Tape& t, Var v) {
  { c.params() } -> std::same_as<ParamStore&>;
  { cc.log_probs(t, v) } -> std::same_as<Var>;
};

struct FinetuneConfig {
  std::size_t n_per_class = 10;
  double holdout = 0.30;
  std::size_t batch = 4;
  double lr = 1e-4;
  std::size_t epochs = 2;
  std::size_t repeats = 15;

  static FinetuneConfig preset(std::size_t n_per_class) {
    if (n_per_class == 10) return {10, 0.30, 4, 1e-4, 2, 15};
    if (n_per_class == 100) return {100, 0.30, 64, 1e-4, 3, 1};
    throw ConfigError("no fine-tuning preset for " + std::to_string(n_per_class) + " samples per class");
  }
};

inline void validate(const FinetuneConfig& c) {
  if (c.n_per_class == 0 || c.batch == 0 || c.epochs == 0 || c.repeats == 0)
    throw ConfigError("fine-tuning counts must all be at least 1");
  if (!(c.holdout > 0.0 && c.holdout < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
  if (!(std::isfinite(c.lr) && c.lr >= 0.0)) throw ConfigError("fine-tuning learning rate must be non-negative");
}

struct FinetuneEpoch {
  std::size_t epoch = 0;
  double lr = 0.0;
  std::vector<std::size_t> batch_sizes;
  double train_loss = 0.0;    // mean over batches
  double holdout_loss = 0.0;  // at the end of the epoch
};

template <BinaryClassifier C>
struct FinetuneResult {
  C model;
  std::vector<FinetuneEpoch> schedule;
  std::size_t best_epoch = 0;
  double best_holdout_loss = 0.0;
  std::size_t train_size = 0;
  std::size_t holdout_size = 0;
};

/// Adapts `base` on `sample`. The sample is split per label into
/// (1 - holdout) training and holdout parts; a classifier with a
/// `prepare(train_split)` member is initialised from the training part.
/// Parameters of the epoch with the lowest holdout loss are returned.
template <BinaryClassifier C>
FinetuneResult<C> finetune_adapt(C base, const EmbeddingDataset& sample, const FinetuneConfig& config,
                                 std::uint64_t seed) {
  validate(config);
  sample.validate_for_training("fine-tuning sample");
  const DatasetSplit split = split_stratified(sample, 1.0 - config.holdout, derive_seed(seed, {0xf1u}));
  const EmbeddingDataset& train = split.first;
  const EmbeddingDataset& hold = split.second;
  for (const auto& label : sample.labels()) {
    if (hold.indices_of(label).empty())
      throw ValidationError("holdout has no '" + label + "' records; increase the sample size");
    if (train.indices_of(label).empty())
      throw ValidationError("fine-tuning split has no '" + label + "' records");
  }

  C model = std::move(base);
  if constexpr (requires { model.prepare(train); }) model.prepare(train);
  model.params().reset_optimizer();

  const Tensor2 xt = train.all_rows();
  const auto yt = binary_targets(train);
  const Tensor2 xh = hold.all_rows();
  const auto yh = binary_targets(hold);

  FinetuneResult<C> result{model, {}, 0, std::numeric_limits<double>::infinity(), train.size(), hold.size()};
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(seed, {0xf2u, epoch}));
    rng.shuffle(order);
    FinetuneEpoch rec;
    rec.epoch = epoch;
    rec.lr = config.lr;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<std::size_t> t;
      for (std::size_t i : idx) t.push_back(yt[i]);
      Tape tape;
      const Var loss = nll_mean(tape, model.log_probs(tape, tape.constant(select_rows(xt, idx))), std::move(t));
      const double value = tape.value(loss)(0, 0);
      if (!std::isfinite(value))
        throw NumericError("non-finite fine-tuning loss in epoch " + std::to_string(epoch));
      loss_sum += value;
      tape.backward(loss, model.params());
      adam_step(model.params(), config.lr);
      rec.batch_sizes.push_back(idx.size());
    }
    rec.train_loss = loss_sum / static_cast<double>(rec.batch_sizes.size());
    rec.holdout_loss = mean_nll(model, xh, yh);
    if (rec.holdout_loss < result.best_holdout_loss) {
      result.model = model;
      result.best_epoch = epoch;
      result.best_holdout_loss = rec.holdout_loss;
    }
    result.schedule.push_back(std::move(rec));
  }
  result.model.params().reset_optimizer();
  return result;
}

}  // namespace protospoof
