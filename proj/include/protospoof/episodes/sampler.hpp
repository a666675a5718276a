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
#include <string>
#include <vector>

#include "protospoof/episodes/dataset.hpp"
#include "protospoof/protonet/model.hpp"
#include "protospoof/protonet/protonet.hpp"
#include "protospoof/rng.hpp"

namespace protospoof {

struct EpisodeClass {
  std::string label;
  std::vector<std::size_t> support;
  std::vector<std::size_t> query;
};

/// Record indices of one few-shot task. Bonafide is always class 0.
struct Episode {
  std::vector<EpisodeClass> classes;
};

struct EpisodeSpec {
  Objective mode = Objective::binary;
  std::size_t support = 5;
  std::size_t query = 15;
  std::size_t spoof_classes = 2;  // multi-class only
};

namespace detail {

struct ClassPool {
  std::string label;
  std::vector<std::size_t> indices;
};

/// Bonafide pool first, then either the pooled fake class (binary) or
/// `spoof_classes` spoof labels drawn without replacement (multi-class).
/// With `all_spoof`, multi-class uses every spoof label in label order.
inline std::vector<ClassPool> episode_pools(const EmbeddingDataset& ds, Objective mode, std::size_t spoof_classes,
                                            Rng& rng, bool all_spoof = false) {
  std::vector<ClassPool> pools;
  pools.push_back({std::string(kBonafide), ds.indices_of(kBonafide)});
  if (mode == Objective::binary) {
    pools.push_back({std::string(kFake), ds.spoof_indices()});
    return pools;
  }
  std::vector<std::string> spoof = ds.spoof_labels();
  if (!all_spoof) {
    if (spoof_classes == 0) throw ConfigError("multi-class episodes need at least one spoof class");
    if (spoof.size() < spoof_classes)
      throw SamplingError("dataset has " + std::to_string(spoof.size()) + " spoof classes, episode needs " +
                          std::to_string(spoof_classes));
    spoof = rng.sample_without_replacement(std::move(spoof), spoof_classes);
  }
  for (auto& label : spoof) pools.push_back({label, ds.indices_of(label)});
  return pools;
}

inline void require_pool(const ClassPool& pool, std::size_t needed) {
  if (pool.indices.size() < needed)
    throw SamplingError("class '" + pool.label + "' has " + std::to_string(pool.indices.size()) +
                        " records, needs " + std::to_string(needed));
}

}  // namespace detail

/// Uniform sampling without replacement inside each class; the first
/// `support` draws form the support set and the rest the queries.
inline Episode sample_episode(const EmbeddingDataset& ds, const EpisodeSpec& spec, Rng& rng) {
  if (spec.support == 0 || spec.query == 0) throw ConfigError("episodes need at least one support and one query");
  auto pools = detail::episode_pools(ds, spec.mode, spec.spoof_classes, rng);
  for (const auto& pool : pools) detail::require_pool(pool, spec.support + spec.query);
  Episode ep;
  for (auto& pool : pools) {
    auto drawn = rng.sample_without_replacement(pool.indices, spec.support + spec.query);
    EpisodeClass c;
    c.label = pool.label;
    c.support.assign(drawn.begin(), drawn.begin() + static_cast<std::ptrdiff_t>(spec.support));
    c.query.assign(drawn.begin() + static_cast<std::ptrdiff_t>(spec.support), drawn.end());
    ep.classes.push_back(std::move(c));
  }
  return ep;
}

inline EpisodeBatch materialize(const EmbeddingDataset& ds, const Episode& ep) {
  EpisodeBatch batch;
  for (const auto& c : ep.classes) {
    batch.labels.push_back(c.label);
    batch.support.push_back(ds.rows(c.support));
    batch.query.push_back(ds.rows(c.query));
  }
  return batch;
}

/// Per-class support sets for one evaluation run.
struct SupportSet {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> indices;
};

/// Support for evaluation run `run_index`. The generator is seeded from
/// (master_seed, run_index) alone, so a run's draw does not depend on which
/// other runs were evaluated or in what order. Multi-class mode uses every
/// spoof label of the adaptation set.
inline SupportSet support_draw(const EmbeddingDataset& ds, Objective mode, std::size_t k, std::uint64_t run_index,
                               std::uint64_t master_seed) {
  if (k == 0) throw ConfigError("support size must be at least 1");
  Rng rng(derive_seed(master_seed, {0x5u, run_index}));
  auto pools = detail::episode_pools(ds, mode, 0, rng, /*all_spoof=*/true);
  if (pools.size() < 2) throw SamplingError("adaptation set has no spoof class");
  for (const auto& pool : pools) detail::require_pool(pool, k);
  SupportSet s;
  for (auto& pool : pools) {
    s.labels.push_back(pool.label);
    s.indices.push_back(rng.sample_without_replacement(pool.indices, k));
  }
  return s;
}

/// Seeded per-label split: round(fraction * n) records of every label go to
/// `first`, the rest to `second`. Original record order is kept in both.
struct DatasetSplit {
  EmbeddingDataset first;
  EmbeddingDataset second;
};

inline DatasetSplit split_stratified(const EmbeddingDataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("split fraction must lie in [0, 1]");
  Rng rng(derive_seed(seed, {0x51u}));
  std::vector<char> to_first(ds.size(), 0);
  for (const auto& label : ds.labels()) {
    const auto& idx = ds.indices_of(label);
    const auto n_first = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    for (std::size_t i : rng.sample_without_replacement(idx, n_first)) to_first[i] = 1;
  }
  std::vector<std::size_t> a, b;
  for (std::size_t i = 0; i < ds.size(); ++i) (to_first[i] ? a : b).push_back(i);
  return DatasetSplit{ds.subset(a), ds.subset(b)};
}

}  // namespace protospoof
