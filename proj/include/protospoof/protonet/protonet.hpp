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

// Prototype construction, distance-softmax classification and the episodic
// loss. Each operation has a tape form (used for training and gradient
// checks) and a plain form returning values.

#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "protospoof/labels.hpp"
#include "protospoof/numkernel/ops.hpp"
#include "protospoof/protonet/model.hpp"

namespace protospoof {

inline constexpr double kDegenerateNorm = 1e-12;

struct Prototype {
  std::string label;
  std::vector<double> vector;
  bool normalized = false;
};

struct ScoredQuery {
  std::string query_id;
  std::vector<std::pair<std::string, double>> probabilities;
  double spoof_score = 0.0;
};

/// Raw (pre-embedding) rows of one episode, one entry per class. Class
/// order defines the target index used by the loss.
struct EpisodeBatch {
  std::vector<std::string> labels;
  std::vector<Tensor2> support;
  std::vector<Tensor2> query;
};

// ---- embedding -------------------------------------------------------------

inline Var embed(Tape& tape, const FewShotModel& model, Var z) {
  const Tensor2& zv = tape.value(z);
  if (zv.cols() != model.dim())
    throw DimensionError("embed: input width " + std::to_string(zv.cols()) + " but model dimension is " +
                         std::to_string(model.dim()));
  const auto& p = model.params();
  const auto& id = model.ids();
  const Var h = relu(tape, affine(tape, z, tape.param(p, id.w1), tape.param(p, id.b1)));
  return affine(tape, h, tape.param(p, id.w2), tape.param(p, id.b2));
}

inline Tensor2 embed(const FewShotModel& model, const Tensor2& z) {
  Tape tape;
  return tape.value(embed(tape, model, tape.constant(z)));
}

// ---- prototypes --------------------------------------------------------------

inline Var mean_prototype(Tape& tape, Var support) {
  if (tape.value(support).rows() == 0) throw EmptySupportError("mean prototype of an empty support set");
  return mean_rows(tape, support);
}

inline Prototype mean_prototype(const Tensor2& support, std::string label = {}) {
  if (support.rows() == 0) throw EmptySupportError("mean prototype of an empty support set");
  Tape tape;
  const Tensor2& v = tape.value(mean_rows(tape, tape.constant(support)));
  return Prototype{std::move(label), std::vector<double>(v.data().begin(), v.data().end()), false};
}

/// Self-attention over the support rows, attention pooling with the learned
/// query vector (logits scaled by 1/sqrt(dim)), then unit-norm scaling.
inline Var attentive_prototype(Tape& tape, const FewShotModel& model, Var support) {
  const Tensor2& sv = tape.value(support);
  if (sv.rows() == 0) throw EmptySupportError("attentive prototype of an empty support set");
  if (sv.cols() != model.dim()) throw DimensionError("attentive_prototype: support width " + sv.shape());
  const Var contextual = multi_head_self_attention(tape, support, model.attention_vars(tape), model.config().heads);
  const Var pool_query = tape.param(model.params(), model.ids().pool_query);
  const Var logits = scale(tape, matmul(tape, contextual, pool_query), 1.0 / std::sqrt(static_cast<double>(model.dim())));
  const Var weights = softmax_rows(tape, transpose(tape, logits));
  const Var pooled = matmul(tape, weights, contextual);
  const double norm = row_norm(tape.value(pooled).row(0));
  if (!(norm >= kDegenerateNorm))
    throw DegeneratePrototypeError("attention-pooled prototype has norm " + std::to_string(norm));
  return l2_normalize_rows(tape, pooled, kDegenerateNorm);
}

inline Prototype attentive_prototype(const FewShotModel& model, const Tensor2& support, std::string label = {}) {
  Tape tape;
  const Tensor2& v = tape.value(attentive_prototype(tape, model, tape.constant(support)));
  return Prototype{std::move(label), std::vector<double>(v.data().begin(), v.data().end()), true};
}

/// Prototype by the model's configured aggregation. `support` is embedded.
inline Var aggregate(Tape& tape, const FewShotModel& model, Var support) {
  return model.config().aggregation == Aggregation::mean ? mean_prototype(tape, support)
                                                          : attentive_prototype(tape, model, support);
}

inline Prototype build_prototype(const FewShotModel& model, const Tensor2& embedded_support, std::string label) {
  return model.config().aggregation == Aggregation::mean ? mean_prototype(embedded_support, std::move(label))
                                                          : attentive_prototype(model, embedded_support, std::move(label));
}

// ---- classification ------------------------------------------------------------

/// Log p(class | query) for every (embedded) query row against stacked
/// prototypes: log-softmax of negative distances.
inline Var class_log_probs(Tape& tape, const FewShotModel& model, Var queries, Var prototypes) {
  const bool squared = model.config().distance == Distance::squared_euclidean;
  const Var dist = pairwise_distance(tape, queries, prototypes, squared);
  return log_softmax_rows(tape, scale(tape, dist, -1.0));
}

inline Tensor2 stack_prototypes(std::span<const Prototype> prototypes, std::size_t dim) {
  Tensor2 out(prototypes.size(), dim);
  for (std::size_t i = 0; i < prototypes.size(); ++i) {
    if (prototypes[i].vector.size() != dim)
      throw DimensionError("prototype '" + prototypes[i].label + "' has dimension " +
                           std::to_string(prototypes[i].vector.size()) + ", expected " + std::to_string(dim));
    std::copy(prototypes[i].vector.begin(), prototypes[i].vector.end(), out.row(i).begin());
  }
  return out;
}

/// Class probabilities (queries x classes) for already-embedded queries.
inline Tensor2 classify_batch(const FewShotModel& model, std::span<const Prototype> prototypes,
                              const Tensor2& embedded_queries) {
  if (prototypes.size() < 2)
    throw ConfigError("classification needs at least 2 prototypes, got " + std::to_string(prototypes.size()));
  if (embedded_queries.cols() != model.dim())
    throw DimensionError("query width " + std::to_string(embedded_queries.cols()) + " vs model dimension " +
                         std::to_string(model.dim()));
  Tape tape;
  const Var lp = class_log_probs(tape, model, tape.constant(embedded_queries),
                                 tape.constant(stack_prototypes(prototypes, model.dim())));
  Tensor2 probs = tape.value(lp);
  for (double& v : probs.data()) v = std::exp(v);
  return probs;
}

inline std::vector<double> classify(const FewShotModel& model, std::span<const Prototype> prototypes,
                                    std::span<const double> embedded_query) {
  const Tensor2 probs = classify_batch(model, prototypes, Tensor2::row_vector(embedded_query));
  return {probs.data().begin(), probs.data().end()};
}

/// Spoof score from class probabilities. Binary: p(fake) of the single
/// spoof class. Multi-class: mean probability over all spoof classes.
inline double score_query(std::span<const double> probabilities, std::span<const std::string> labels,
                          Objective objective) {
  if (probabilities.size() != labels.size())
    throw DimensionError("score_query: " + std::to_string(probabilities.size()) + " probabilities for " +
                         std::to_string(labels.size()) + " labels");
  double sum = 0.0;
  std::size_t spoof = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!is_spoof_label(labels[i])) continue;
    sum += probabilities[i];
    ++spoof;
  }
  if (spoof == 0) throw ConfigError("score_query: no spoof class among the prototypes");
  if (objective == Objective::binary && spoof != 1)
    throw ConfigError("score_query: binary scoring expects exactly one spoof class, got " + std::to_string(spoof));
  return sum / static_cast<double>(spoof);
}

inline std::vector<std::string> prototype_labels(std::span<const Prototype> prototypes) {
  std::vector<std::string> labels;
  labels.reserve(prototypes.size());
  for (const auto& p : prototypes) labels.push_back(p.label);
  return labels;
}

/// Spoof scores of a batch of embedded queries.
inline std::vector<double> score_batch(const FewShotModel& model, std::span<const Prototype> prototypes,
                                       const Tensor2& embedded_queries) {
  const Tensor2 probs = classify_batch(model, prototypes, embedded_queries);
  const auto labels = prototype_labels(prototypes);
  std::vector<double> scores(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) scores[i] = score_query(probs.row(i), labels, model.config().objective);
  return scores;
}

inline std::vector<ScoredQuery> score_queries(const FewShotModel& model, std::span<const Prototype> prototypes,
                                              const Tensor2& embedded_queries, std::span<const std::string> ids) {
  if (ids.size() != embedded_queries.rows()) throw DimensionError("score_queries: id count does not match rows");
  const Tensor2 probs = classify_batch(model, prototypes, embedded_queries);
  const auto labels = prototype_labels(prototypes);
  std::vector<ScoredQuery> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    ScoredQuery q{ids[i], {}, score_query(probs.row(i), labels, model.config().objective)};
    for (std::size_t c = 0; c < labels.size(); ++c) q.probabilities.emplace_back(labels[c], probs(i, c));
    out.push_back(std::move(q));
  }
  return out;
}

// ---- episodic loss -------------------------------------------------------------

/// Mean negative log-likelihood of the true class over every query of the
/// episode. Support and query rows are embedded in one batch.
inline Var episodic_loss(Tape& tape, const FewShotModel& model, const EpisodeBatch& episode) {
  const std::size_t classes = episode.support.size();
  if (classes < 2 || episode.query.size() != classes)
    throw ConfigError("episode needs at least 2 classes with matching support and query sets");
  std::size_t total = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (episode.support[c].rows() == 0)
      throw EmptySupportError("class " + std::to_string(c) + " has no support rows");
    if (episode.query[c].rows() == 0) throw ConfigError("class " + std::to_string(c) + " has no query rows");
    total += episode.support[c].rows() + episode.query[c].rows();
  }

  Tensor2 stacked(total, model.dim());
  std::vector<std::vector<std::size_t>> support_rows(classes);
  std::vector<std::size_t> query_rows;
  std::vector<std::size_t> targets;
  std::size_t r = 0;
  auto append = [&](const Tensor2& block) {
    if (block.cols() != model.dim())
      throw DimensionError("episode rows have width " + std::to_string(block.cols()) + ", model dimension is " +
                           std::to_string(model.dim()));
    std::copy(block.data().begin(), block.data().end(), stacked.row(r).begin());
    r += block.rows();
  };
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < episode.support[c].rows(); ++i) support_rows[c].push_back(r + i);
    append(episode.support[c]);
  }
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < episode.query[c].rows(); ++i) {
      query_rows.push_back(r + i);
      targets.push_back(c);
    }
    append(episode.query[c]);
  }

  const Var embedded = embed(tape, model, tape.constant(std::move(stacked)));
  std::vector<Var> protos;
  protos.reserve(classes);
  for (std::size_t c = 0; c < classes; ++c)
    protos.push_back(aggregate(tape, model, gather_rows(tape, embedded, support_rows[c])));
  const Var prototypes = concat_rows(tape, protos);
  const Var queries = gather_rows(tape, embedded, std::move(query_rows));
  return nll_mean(tape, class_log_probs(tape, model, queries, prototypes), std::move(targets));
}

inline double episodic_loss_value(const FewShotModel& model, const EpisodeBatch& episode) {
  Tape tape;
  return tape.value(episodic_loss(tape, model, episode))(0, 0);
}

/// Prototypes for every class of an episode, from raw support rows.
inline std::vector<Prototype> episode_prototypes(const FewShotModel& model, const EpisodeBatch& episode) {
  std::vector<Prototype> out;
  for (std::size_t c = 0; c < episode.support.size(); ++c) {
    if (episode.support[c].rows() == 0) throw EmptySupportError("class '" + episode.labels.at(c) + "' has no support");
    out.push_back(build_prototype(model, embed(model, episode.support[c]), episode.labels.at(c)));
  }
  return out;
}

}  // namespace protospoof
