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

// Binary classifiers over raw embeddings used as zero-shot and fine-tuning
// baselines. Both expose the same interface: a parameter store and
// log-probabilities with column 0 = bonafide, column 1 = fake.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "protospoof/episodes/dataset.hpp"
#include "protospoof/numkernel/ops.hpp"
#include "protospoof/numkernel/optim.hpp"
#include "protospoof/protonet/protonet.hpp"
#include "protospoof/rng.hpp"

namespace protospoof {

/// 0 for bonafide, 1 for every spoof label.
inline std::vector<std::size_t> binary_targets(const EmbeddingDataset& ds) {
  std::vector<std::size_t> t(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) t[i] = is_spoof_label(ds[i].label) ? 1 : 0;
  return t;
}

/// Spoof score p(fake) for every row, from a classifier's log-probabilities.
template <class Classifier>
std::vector<double> fake_probabilities(const Classifier& c, const Tensor2& x) {
  Tape tape;
  const Tensor2& lp = tape.value(c.log_probs(tape, tape.constant(x)));
  std::vector<double> out(lp.rows());
  for (std::size_t i = 0; i < lp.rows(); ++i) out[i] = std::exp(lp(i, 1));
  return out;
}

/// Mean cross-entropy of a classifier on the given rows.
template <class Classifier>
double mean_nll(const Classifier& c, const Tensor2& x, const std::vector<std::size_t>& targets) {
  Tape tape;
  return tape.value(nll_mean(tape, c.log_probs(tape, tape.constant(x)), targets))(0, 0);
}

class ProbeModel {
 public:
  static ProbeModel initialized(std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw ConfigError("probe dimension must be positive");
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    Tensor2 w(dim, 2);
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    ProbeModel m;
    m.w_ = m.params_.add("probe.w", std::move(w));
    m.b_ = m.params_.add("probe.b", Tensor2(1, 2));
    return m;
  }

  std::size_t dim() const { return params_.value(w_).rows(); }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }

  Var log_probs(Tape& tape, Var x) const {
    return log_softmax_rows(tape, affine(tape, x, tape.param(params_, w_), tape.param(params_, b_)));
  }

  std::vector<double> scores(const Tensor2& x) const { return fake_probabilities(*this, x); }

 private:
  ParamStore params_;
  ParamId w_{}, b_{};
};

struct ProbeConfig {
  std::size_t epochs = 30;
  std::size_t batch = 64;
  double lr = 1e-2;
  std::uint64_t seed = 0;
};

/// Mini-batch cross-entropy training with Adam over shuffled batches.
inline ProbeModel train_probe(const EmbeddingDataset& ds, const ProbeConfig& config) {
  ds.validate_for_training("probe training set");
  if (config.epochs == 0 || config.batch == 0) throw ConfigError("probe epochs and batch size must be at least 1");
  ProbeModel probe = ProbeModel::initialized(ds.dim(), derive_seed(config.seed, {0xb0u}));
  const Tensor2 x = ds.all_rows();
  const auto targets = binary_targets(ds);
  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, {0xb1u, epoch}));
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<std::size_t> t;
      for (std::size_t i : idx) t.push_back(targets[i]);
      Tape tape;
      const Var loss = nll_mean(tape, probe.log_probs(tape, tape.constant(select_rows(x, idx))), std::move(t));
      if (!std::isfinite(tape.value(loss)(0, 0))) throw NumericError("non-finite probe loss in epoch " + std::to_string(epoch));
      tape.backward(loss, probe.params());
      adam_step(probe.params(), config.lr);
    }
  }
  probe.params().reset_optimizer();
  return probe;
}

/// Binary classifier derived from a trained few-shot model: the embedding
/// network g followed by two learnable class prototypes (bonafide, fake).
/// Prototypes start from the model's own aggregation of the training rows,
/// so before any update it matches few-shot inference on that support.
class PrototypeHeadClassifier {
 public:
  explicit PrototypeHeadClassifier(const FewShotModel& base)
      : dim_(base.dim()), squared_(base.config().distance == Distance::squared_euclidean), base_(base) {
    const auto& src = base.params();
    for (const char* name : {"embed.w1", "embed.b1", "embed.w2", "embed.b2"})
      ids_.push_back(params_.add(name, src.value(src.id(name))));
    head_ = params_.add("head.prototypes", Tensor2(2, dim_));
  }

  std::size_t dim() const noexcept { return dim_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }
  const Tensor2& prototypes() const { return params_.value(head_); }

  /// Sets the prototypes from labelled raw rows using the base model.
  void prepare(const EmbeddingDataset& train_split) {
    Tensor2& head = params_.value(head_);
    const auto spoof = train_split.spoof_indices();
    const std::vector<std::size_t> bona = train_split.indices_of(kBonafide);
    if (bona.empty() || spoof.empty()) throw ValidationError("prototype head needs both classes");
    const Prototype pb = build_prototype(base_, embed(base_, train_split.rows(bona)), std::string(kBonafide));
    const Prototype pf = build_prototype(base_, embed(base_, train_split.rows(spoof)), std::string(kFake));
    std::copy(pb.vector.begin(), pb.vector.end(), head.row(0).begin());
    std::copy(pf.vector.begin(), pf.vector.end(), head.row(1).begin());
  }

  Var log_probs(Tape& tape, Var x) const {
    const Var h = relu(tape, affine(tape, x, tape.param(params_, ids_[0]), tape.param(params_, ids_[1])));
    const Var e = affine(tape, h, tape.param(params_, ids_[2]), tape.param(params_, ids_[3]));
    const Var d = pairwise_distance(tape, e, tape.param(params_, head_), squared_);
    return log_softmax_rows(tape, scale(tape, d, -1.0));
  }

  std::vector<double> scores(const Tensor2& x) const { return fake_probabilities(*this, x); }

 private:
  std::size_t dim_;
  bool squared_;
  FewShotModel base_;
  ParamStore params_;
  std::vector<ParamId> ids_;
  ParamId head_{};
};

}  // namespace protospoof
