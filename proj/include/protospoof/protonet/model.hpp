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

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "protospoof/numkernel/attention.hpp"
#include "protospoof/numkernel/param_store.hpp"
#include "protospoof/rng.hpp"

namespace protospoof {

enum class Aggregation : std::uint8_t { mean = 0, self_attentive = 1 };
enum class Objective : std::uint8_t { binary = 0, multi_class = 1 };
enum class Distance : std::uint8_t { euclidean = 0, squared_euclidean = 1 };

constexpr std::string_view to_string(Aggregation a) { return a == Aggregation::mean ? "mean" : "attention"; }
constexpr std::string_view to_string(Objective o) { return o == Objective::binary ? "binary" : "multi-class"; }
constexpr std::string_view to_string(Distance d) {
  return d == Distance::euclidean ? "euclidean" : "squared-euclidean";
}

inline std::optional<Aggregation> parse_aggregation(std::string_view s) {
  if (s == "mean") return Aggregation::mean;
  if (s == "attention" || s == "attn" || s == "self-attentive") return Aggregation::self_attentive;
  return std::nullopt;
}
inline std::optional<Objective> parse_objective(std::string_view s) {
  if (s == "binary") return Objective::binary;
  if (s == "multi-class" || s == "multiclass") return Objective::multi_class;
  return std::nullopt;
}
inline std::optional<Distance> parse_distance(std::string_view s) {
  if (s == "euclidean") return Distance::euclidean;
  if (s == "squared-euclidean" || s == "squared_euclidean") return Distance::squared_euclidean;
  return std::nullopt;
}

struct ModelConfig {
  std::size_t dim = 32;
  std::size_t heads = 2;
  Aggregation aggregation = Aggregation::self_attentive;
  Objective objective = Objective::binary;
  Distance distance = Distance::euclidean;
};

/// Embedding network g (affine-relu-affine, width preserving), one
/// self-attention layer and the attention-pooling query vector.
class FewShotModel {
 public:
  struct Ids {
    ParamId w1, b1, w2, b2;
    ParamId wq, bq, wk, bk, wv, bv, wo, bo;
    ParamId pool_query;
  };

  /// Parameters drawn uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  static FewShotModel initialized(const ModelConfig& config, std::uint64_t seed) {
    validate(config);
    Rng rng(seed);
    const std::size_t d = config.dim;
    auto fan_in = [&rng, d](std::size_t rows, std::size_t cols) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(d));
      Tensor2 t(rows, cols);
      for (double& v : t.data()) v = rng.uniform(-bound, bound);
      return t;
    };
    ParamStore store;
    for (const char* name : kParamNames) {
      const std::string_view n(name);
      if (n.starts_with("embed.b") || n.starts_with("attn.b")) store.add(name, Tensor2(1, d));
      else if (n == "pool.query") store.add(name, fan_in(d, 1));
      else store.add(name, fan_in(d, d));
    }
    return FewShotModel(config, std::move(store));
  }

  /// Rebuilds a model from a named parameter set (checkpoint load).
  static FewShotModel from_params(const ModelConfig& config, ParamStore store) {
    validate(config);
    for (const char* name : kParamNames) {
      if (!store.contains(name)) throw FormatError(std::string("missing parameter block '") + name + "'");
      const Tensor2& v = store.value(store.id(name));
      const std::string_view n(name);
      const std::size_t rows = (n.starts_with("embed.b") || n.starts_with("attn.b")) ? 1 : config.dim;
      const std::size_t cols = n == "pool.query" ? 1 : config.dim;
      if (v.rows() != rows || v.cols() != cols)
        throw DimensionError("parameter '" + std::string(name) + "' has shape " + v.shape() + ", expected (" +
                             std::to_string(rows) + "," + std::to_string(cols) + ")");
    }
    if (store.size() != std::size(kParamNames)) throw FormatError("unexpected extra parameter blocks");
    return FewShotModel(config, std::move(store));
  }

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t dim() const noexcept { return config_.dim; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }
  const Ids& ids() const noexcept { return ids_; }

  void set_aggregation(Aggregation a) { config_.aggregation = a; }
  void set_objective(Objective o) { config_.objective = o; }
  void set_distance(Distance d) { config_.distance = d; }

  AttentionVars attention_vars(Tape& tape) const {
    return AttentionVars{tape.param(params_, ids_.wq), tape.param(params_, ids_.bq), tape.param(params_, ids_.wk),
                         tape.param(params_, ids_.bk), tape.param(params_, ids_.wv), tape.param(params_, ids_.bv),
                         tape.param(params_, ids_.wo), tape.param(params_, ids_.bo)};
  }

  static constexpr const char* kParamNames[] = {
      "embed.w1", "embed.b1", "embed.w2", "embed.b2", "attn.wq", "attn.bq", "attn.wk",
      "attn.bk",  "attn.wv",  "attn.bv",  "attn.wo",  "attn.bo", "pool.query",
  };

 private:
  FewShotModel(const ModelConfig& config, ParamStore store) : config_(config), params_(std::move(store)) {
    ids_ = Ids{params_.id("embed.w1"), params_.id("embed.b1"), params_.id("embed.w2"), params_.id("embed.b2"),
               params_.id("attn.wq"),  params_.id("attn.bq"),  params_.id("attn.wk"),  params_.id("attn.bk"),
               params_.id("attn.wv"),  params_.id("attn.bv"),  params_.id("attn.wo"),  params_.id("attn.bo"),
               params_.id("pool.query")};
  }

  static void validate(const ModelConfig& c) {
    if (c.dim == 0) throw ConfigError("embedding dimension must be positive");
    if (c.heads == 0 || c.dim % c.heads != 0)
      throw ConfigError("embedding dimension " + std::to_string(c.dim) + " is not divisible by " +
                        std::to_string(c.heads) + " heads");
  }

  ModelConfig config_;
  ParamStore params_;
  Ids ids_;
};

}  // namespace protospoof
