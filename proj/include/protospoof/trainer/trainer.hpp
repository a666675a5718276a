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

// Episodic training with step-decayed Adam and best-validation selection.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "protospoof/episodes/sampler.hpp"
#include "protospoof/numkernel/optim.hpp"
#include "protospoof/protonet/protonet.hpp"

namespace protospoof {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t episodes_per_epoch = 100;
  std::size_t support = 5;
  std::size_t query = 15;
  double lr = 1e-3;
  std::size_t lr_step = 20;
  double lr_gamma = 0.5;
  Objective objective = Objective::binary;
  Aggregation aggregation = Aggregation::self_attentive;
  std::size_t spoof_classes = 2;
  std::size_t validation_episodes = 50;
  std::uint64_t seed = 0;

  EpisodeSpec episode_spec() const { return EpisodeSpec{objective, support, query, spoof_classes}; }
};

inline void validate(const TrainConfig& c) {
  if (c.epochs == 0 || c.episodes_per_epoch == 0 || c.support == 0 || c.query == 0 || c.lr_step == 0 ||
      c.validation_episodes == 0)
    throw ConfigError("training counts must all be at least 1");
  if (c.objective == Objective::multi_class && c.spoof_classes == 0)
    throw ConfigError("multi-class training needs at least one spoof class per episode");
  if (!(std::isfinite(c.lr) && c.lr >= 0.0)) throw ConfigError("learning rate must be finite and non-negative");
  if (!(c.lr_gamma > 0.0 && c.lr_gamma <= 1.0)) throw ConfigError("lr_gamma must lie in (0, 1]");
}

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"episodes_per_epoch", c.episodes_per_epoch},
          {"k", c.support},
          {"q", c.query},
          {"lr", c.lr},
          {"lr_step", c.lr_step},
          {"lr_gamma", c.lr_gamma},
          {"objective", to_string(c.objective)},
          {"aggregation", to_string(c.aggregation)},
          {"n_spoof_classes", c.spoof_classes},
          {"validation_episodes", c.validation_episodes},
          {"seed", c.seed}};
}

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double validation_accuracy = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_accuracy = 0.0;

  /// One JSON object per epoch. Wall time is left out when `timing` is
  /// false so that logs of repeated runs compare byte for byte.
  std::string to_jsonl(bool timing = true) const {
    std::ostringstream out;
    for (const auto& e : epochs) {
      nlohmann::ordered_json j = {{"epoch", e.epoch},
                                  {"mean_loss", e.mean_loss},
                                  {"validation_accuracy", e.validation_accuracy},
                                  {"lr", e.lr}};
      if (timing) j["wall_seconds"] = e.wall_seconds;
      out << j.dump() << "\n";
    }
    return out.str();
  }
};

struct TrainResult {
  FewShotModel model;
  TrainLog log;
};

inline constexpr std::uint64_t kTrainStream = 0x7a1u;
inline constexpr std::uint64_t kValidStream = 0x7a2u;

/// Fraction of correctly classified queries (argmax) pooled over
/// `n_episodes` validation episodes. Episode i is seeded from (seed, i) only.
inline double validation_accuracy(const FewShotModel& model, const EmbeddingDataset& valid, const TrainConfig& config,
                                  std::size_t n_episodes) {
  if (n_episodes == 0) throw ConfigError("validation needs at least one episode");
  const EpisodeSpec spec = config.episode_spec();
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < n_episodes; ++i) {
    Rng rng(derive_seed(config.seed, {kValidStream, i}));
    const EpisodeBatch batch = materialize(valid, sample_episode(valid, spec, rng));
    const auto protos = episode_prototypes(model, batch);
    for (std::size_t c = 0; c < batch.query.size(); ++c) {
      const Tensor2 probs = classify_batch(model, protos, embed(model, batch.query[c]));
      for (std::size_t r = 0; r < probs.rows(); ++r) {
        const auto row = probs.row(r);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < row.size(); ++j)
          if (row[j] > row[arg]) arg = j;
        correct += arg == c;
        ++total;
      }
    }
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

/// Called after each epoch; returning false stops training early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

inline TrainResult train(FewShotModel model, const EmbeddingDataset& train_set, const EmbeddingDataset& valid_set,
                         const TrainConfig& config, const EpochCallback& on_epoch = {}) {
  validate(config);
  train_set.validate_for_training("training set");
  valid_set.validate_for_training("validation set");
  if (train_set.dim() != model.dim() || valid_set.dim() != model.dim())
    throw DimensionError("dataset dimension does not match model dimension " + std::to_string(model.dim()));
  model.set_aggregation(config.aggregation);
  model.set_objective(config.objective);
  model.params().reset_optimizer();

  const EpisodeSpec spec = config.episode_spec();
  TrainLog log;
  std::optional<FewShotModel> best;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = step_lr(config.lr, epoch, config.lr_step, config.lr_gamma);
    double loss_sum = 0.0;
    for (std::size_t ep = 0; ep < config.episodes_per_epoch; ++ep) {
      Rng rng(derive_seed(config.seed, {kTrainStream, epoch, ep}));
      const EpisodeBatch batch = materialize(train_set, sample_episode(train_set, spec, rng));
      Tape tape;
      const Var loss = episodic_loss(tape, model, batch);
      const double value = tape.value(loss)(0, 0);
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "non-finite training loss " << value << " at epoch " << epoch << ", episode " << ep;
        throw NumericError(msg.str());
      }
      loss_sum += value;
      tape.backward(loss, model.params());
      adam_step(model.params(), lr);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / static_cast<double>(config.episodes_per_epoch);
    rec.validation_accuracy = validation_accuracy(model, valid_set, config, config.validation_episodes);
    rec.lr = lr;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.epochs.push_back(rec);
    if (!best || rec.validation_accuracy > log.best_accuracy) {
      best = model;
      log.best_epoch = epoch;
      log.best_accuracy = rec.validation_accuracy;
    }
    if (on_epoch && !on_epoch(rec)) break;
  }
  best->params().reset_optimizer();
  return TrainResult{std::move(*best), std::move(log)};
}

}  // namespace protospoof
