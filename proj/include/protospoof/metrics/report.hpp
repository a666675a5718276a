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

// Multi-run evaluation reports and their cross-dataset aggregates.

#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "protospoof/error.hpp"

namespace protospoof {

struct EvalReport {
  std::string dataset;
  std::string method;
  std::string aggregation;  // "mean", "attention" or "none"
  std::string objective;    // "binary" or "multi-class"
  std::size_t k = 0;
  std::size_t runs = 0;
  std::vector<double> per_run_eer;
  double aeer = 0.0;
  double stdev = 0.0;  // sample standard deviation; 0 for a single run
  std::uint64_t seed = 0;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Fills runs, aeer and std from per_run_eer.
inline void summarize(EvalReport& r) {
  r.runs = r.per_run_eer.size();
  if (r.runs == 0) throw ValidationError("report has no runs");
  double sum = 0.0;
  for (double e : r.per_run_eer) sum += e;
  r.aeer = sum / static_cast<double>(r.runs);
  double ss = 0.0;
  for (double e : r.per_run_eer) ss += (e - r.aeer) * (e - r.aeer);
  r.stdev = r.runs > 1 ? std::sqrt(ss / static_cast<double>(r.runs - 1)) : 0.0;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  return {{"dataset", r.dataset}, {"method", r.method}, {"aggregation", r.aggregation},
          {"objective", r.objective}, {"k", r.k},     {"runs", r.runs},
          {"per_run_eer", r.per_run_eer}, {"aeer", r.aeer}, {"std", r.stdev},
          {"seed", r.seed}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.aggregation = j.at("aggregation").get<std::string>();
    r.objective = j.at("objective").get<std::string>();
    r.k = j.at("k").get<std::size_t>();
    r.runs = j.at("runs").get<std::size_t>();
    r.per_run_eer = j.at("per_run_eer").get<std::vector<double>>();
    r.aeer = j.at("aeer").get<double>();
    r.stdev = j.at("std").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

/// Per-dataset EER of a method without a support size (zero-shot).
struct DatasetEer {
  std::string dataset;
  double eer = 0.0;
};

namespace detail {

template <class A, class B, class GetA, class GetB>
double mean_paired_difference(std::span<const A> a, std::span<const B> b, GetA get_a, GetB get_b) {
  if (a.empty()) throw ValidationError("no datasets to aggregate");
  if (a.size() != b.size())
    throw ValidationError("dataset lists differ in length (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  std::set<std::string> seen;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!seen.insert(a[i].dataset).second) throw ValidationError("dataset '" + a[i].dataset + "' listed twice");
    std::size_t j = 0;
    while (j < b.size() && b[j].dataset != a[i].dataset) ++j;
    if (j == b.size()) throw ValidationError("dataset '" + a[i].dataset + "' missing from the second list");
    sum += get_a(a[i]) - get_b(b[j]);
  }
  return sum / static_cast<double>(a.size());
}

inline void require_k(std::span<const EvalReport> reports, std::size_t k) {
  for (const auto& r : reports)
    if (r.k != k)
      throw ValidationError("report for '" + r.dataset + "' has k = " + std::to_string(r.k) + ", expected " +
                            std::to_string(k));
}

}  // namespace detail

/// Mean over datasets of aEER(mean prototypes) - aEER(attentive); positive
/// when attention helps. Datasets are paired by name, summed in the order
/// of `proto`.
inline double delta_eer_method(std::span<const EvalReport> proto, std::span<const EvalReport> attn, std::size_t k) {
  detail::require_k(proto, k);
  detail::require_k(attn, k);
  return detail::mean_paired_difference(
      proto, attn, [](const EvalReport& r) { return r.aeer; }, [](const EvalReport& r) { return r.aeer; });
}

/// Mean over datasets of aEER(attentive few-shot) - EER(zero-shot);
/// negative when the few-shot model has the lower error.
inline double delta_eer_zeroshot(std::span<const EvalReport> attn, std::span<const DatasetEer> zeroshot,
                                 std::size_t k) {
  detail::require_k(attn, k);
  return detail::mean_paired_difference(
      attn, zeroshot, [](const EvalReport& r) { return r.aeer; }, [](const DatasetEer& z) { return z.eer; });
}

}  // namespace protospoof
