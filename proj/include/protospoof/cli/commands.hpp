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

// Subcommand implementations. Argument parsing lives in the tool; these
// functions take resolved options, write their artifacts and return an
// exit code.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "protospoof/experiment/benchmark.hpp"
#include "protospoof/protonet/checkpoint.hpp"

namespace protospoof::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4, kPartial = 5 };

inline constexpr const char* kOutDirEnv = "PROTOSPOOF_OUT_DIR";

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::configuration: return kUsage;
    case ErrorKind::degenerate_prototype:
    case ErrorKind::conditioning:
    case ErrorKind::numeric: return kNumeric;
    default: return kData;
  }
}

/// Explicit directory, else $PROTOSPOOF_OUT_DIR, else the current directory.
inline fs::path resolve_out_dir(const std::optional<fs::path>& explicit_dir) {
  if (explicit_dir) return *explicit_dir;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return fs::path(env);
  return fs::path(".");
}

inline void write_json(const fs::path& path, const Json& j) { io::write_file(path, j.dump(2) + "\n"); }

// ---- gen-data ------------------------------------------------------------------

inline constexpr const char* kSplitFiles[] = {"source-train.psed", "source-valid.psed", "target-adapt.psed",
                                              "target-trials.psed"};

struct GenDataOptions {
  std::optional<fs::path> spec_path;  // default spec when absent
  std::optional<fs::path> out_dir;
  std::optional<std::uint64_t> seed;  // overrides data.seed
};

inline Json label_counts(const EmbeddingDataset& ds) {
  Json j = Json::object();
  for (const auto& l : ds.labels()) j[l] = ds.indices_of(l).size();
  return j;
}

inline Json spec_json(const ShiftSpec& s) {
  return {{"dim", s.dim},
          {"seed", s.seed},
          {"families", s.families},
          {"source_per_class", s.source_per_class},
          {"target_per_class", s.target_per_class},
          {"separation", s.separation},
          {"common_fraction", s.common_fraction},
          {"heldout_alignment", s.heldout_alignment},
          {"heldout_novelty", s.heldout_novelty},
          {"noise", s.noise},
          {"low_rank", s.low_rank},
          {"low_rank_scale", s.low_rank_scale},
          {"family_scales", s.family_scales},
          {"outlier_rate", s.outlier_rate},
          {"outlier_scale", s.outlier_scale},
          {"translation", s.translation},
          {"rotation_deg", s.rotation_deg},
          {"cov_scale", s.cov_scale},
          {"label_noise", s.label_noise}};
}

inline int cmd_gen_data(const GenDataOptions& opt, std::ostream& out) {
  ShiftSpec spec;
  bool has_seed = false;
  if (opt.spec_path) {
    const std::string text = io::read_file(*opt.spec_path);
    spec = parse_shift_spec(text);
    has_seed = config::parse(text).contains("data.seed");
  }
  if (opt.seed) {
    spec.seed = *opt.seed;
    has_seed = true;
  }
  if (opt.spec_path && !has_seed) throw ConfigError("a seed is required: set data.seed in the spec or pass --seed");
  validate(spec);
  for (const auto& w : shift_warnings(spec, 100 + 20)) out << "warning: " << w << "\n";

  const fs::path dir = resolve_out_dir(opt.out_dir);
  fs::create_directories(dir);
  const ShiftedData data = generate_shifted(spec);
  const BenchmarkSplits b = make_splits(data, dir.filename().string(), spec.seed);
  save_dataset(data.source, dir / "source.psed");
  save_dataset(data.target, dir / "target.psed");
  const EmbeddingDataset* parts[] = {&b.train, &b.valid, &b.adapt, &b.trials};
  Json files = Json::array();
  files.push_back({{"file", "source.psed"}, {"role", "source"}, {"records", data.source.size()},
                   {"labels", label_counts(data.source)}});
  files.push_back({{"file", "target.psed"}, {"role", "target"}, {"records", data.target.size()},
                   {"labels", label_counts(data.target)}});
  const char* roles[] = {"train", "valid", "adapt", "trials"};
  for (std::size_t i = 0; i < 4; ++i) {
    save_dataset(*parts[i], dir / kSplitFiles[i]);
    files.push_back({{"file", kSplitFiles[i]}, {"role", roles[i]}, {"records", parts[i]->size()},
                     {"labels", label_counts(*parts[i])}});
  }
  Json manifest = {{"command", "gen-data"},
                   {"seed", spec.seed},
                   {"spec", spec_json(spec)},
                   {"spec_text", to_text(spec)},
                   {"heldout_label", spoof_family_label(spec.families)},
                   {"splits", {{"train_fraction", kTrainFraction}, {"adapt_fraction", kAdaptFraction}}},
                   {"files", files}};
  write_json(dir / "manifest.json", manifest);
  out << "wrote " << data.source.size() << " source and " << data.target.size() << " target records to "
      << dir.string() << "\n";
  return kOk;
}

// ---- train ---------------------------------------------------------------------

struct TrainOptions {
  fs::path train;
  fs::path valid;
  std::optional<fs::path> out;  // checkpoint; default <out dir>/model.psfm
  std::optional<fs::path> log;  // default: checkpoint with .log.jsonl
  TrainConfig config;
  Distance distance = Distance::euclidean;
  bool log_timing = false;
};

inline Json train_config_json(const TrainOptions& o) {
  Json j = to_json(o.config);
  j["distance"] = to_string(o.distance);
  j["dim"] = nullptr;
  return j;
}

inline fs::path default_log_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p.replace_extension(".log.jsonl");
  return p;
}

/// Trains a freshly initialised model; returns the selected model and log.
inline TrainResult run_training(const EmbeddingDataset& train_set, const EmbeddingDataset& valid_set,
                                const TrainConfig& config, Distance distance) {
  ModelConfig mc;
  mc.dim = train_set.dim();
  mc.aggregation = config.aggregation;
  mc.objective = config.objective;
  mc.distance = distance;
  return train(FewShotModel::initialized(mc, derive_seed(config.seed, {0x1u})), train_set, valid_set, config);
}

inline std::string train_log_text(const TrainOptions& o, std::size_t dim, const TrainLog& log) {
  Json cfg = train_config_json(o);
  cfg["dim"] = dim;
  std::string text = Json{{"type", "config"}, {"config", cfg}}.dump() + "\n";
  std::istringstream epochs(log.to_jsonl(o.log_timing));
  for (std::string line; std::getline(epochs, line);) {
    Json e = Json::parse(line);
    Json rec = {{"type", "epoch"}};
    for (auto& [k, v] : e.items()) rec[k] = v;
    text += rec.dump() + "\n";
  }
  text += Json{{"type", "summary"}, {"best_epoch", log.best_epoch}, {"best_validation_accuracy", log.best_accuracy}}
              .dump() +
          "\n";
  return text;
}

inline int cmd_train(const TrainOptions& o, std::ostream& out) {
  const EmbeddingDataset train_set = load_dataset(o.train);
  const EmbeddingDataset valid_set = load_dataset(o.valid);
  const fs::path ckpt = o.out ? *o.out : resolve_out_dir(std::nullopt) / "model.psfm";
  const fs::path log_path = o.log ? *o.log : default_log_path(ckpt);
  out << "config " << train_config_json(o).dump() << "\n";
  TrainResult r = run_training(train_set, valid_set, o.config, o.distance);
  for (const auto& e : r.log.epochs)
    out << "epoch " << std::setw(3) << e.epoch << "  loss " << std::fixed << std::setprecision(4) << e.mean_loss
        << "  val_acc " << e.validation_accuracy << "  lr " << std::scientific << std::setprecision(3) << e.lr
        << std::defaultfloat << "  " << std::fixed << std::setprecision(2) << e.wall_seconds << "s\n"
        << std::defaultfloat;
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_model(r.model, ckpt);
  io::write_file(log_path, train_log_text(o, train_set.dim(), r.log));
  out << "best epoch " << r.log.best_epoch << " (validation accuracy " << r.log.best_accuracy << ")\n"
      << "wrote " << ckpt.string() << " and " << log_path.string() << "\n";
  return kOk;
}

// ---- eval ----------------------------------------------------------------------

struct EvalOptions {
  fs::path model;
  fs::path adapt;
  fs::path trials;
  std::optional<fs::path> out;  // default <out dir>/report.json
  std::size_t k = 5;
  std::size_t runs = 100;
  std::uint64_t seed = 0;
  std::string dataset;  // default: trials file stem
  SupportCorruption corruption;
};

inline Json report_document(const EvalReport& r, const Json& config) {
  Json j = to_json(r);
  j["config"] = config;
  return j;
}

inline int cmd_eval(const EvalOptions& o, std::ostream& out) {
  const FewShotModel model = load_model(o.model);
  const EmbeddingDataset adapt = load_dataset(o.adapt);
  const EmbeddingDataset trials = load_dataset(o.trials);
  FewShotEvalOptions opt;
  opt.k = o.k;
  opt.runs = o.runs;
  opt.seed = o.seed;
  opt.dataset = o.dataset.empty() ? o.trials.stem().string() : o.dataset;
  opt.corruption = o.corruption;
  const char* method = model.config().aggregation == Aggregation::mean ? "protonet-mean" : "protonet-attn";
  const EvalReport r = evaluate_fewshot(model, adapt, trials, opt, method);
  const Json cfg = {{"command", "eval"},
                    {"model", o.model.filename().string()},
                    {"adapt", o.adapt.filename().string()},
                    {"trials", o.trials.filename().string()},
                    {"k", o.k},
                    {"runs", o.runs},
                    {"seed", o.seed},
                    {"distance", to_string(model.config().distance)},
                    {"corrupt_fraction", o.corruption.fraction},
                    {"corrupt_scale", o.corruption.scale}};
  const fs::path path = o.out ? *o.out : resolve_out_dir(std::nullopt) / "report.json";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_json(path, report_document(r, cfg));
  out << r.method << " on " << r.dataset << ": k=" << r.k << " runs=" << r.runs << " aEER " << std::fixed
      << std::setprecision(2) << r.aeer << "% (std " << r.stdev << ")\n"
      << std::defaultfloat << "wrote " << path.string() << "\n";
  return kOk;
}

// ---- compare -------------------------------------------------------------------

struct CompareOptions {
  fs::path benchmark_dir;
  std::optional<fs::path> out_dir;
  std::vector<std::string> methods{std::begin(kMethodNames), std::end(kMethodNames)};
  std::vector<std::size_t> ks{5, 10, 100};
  std::size_t runs = 100;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool train_missing = false;
  TrainConfig train_template;  // aggregation and seed are set per model
};

/// Runs `n` independent tasks on up to `jobs` threads. Task i writes only
/// its own slot, so results do not depend on scheduling.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) task(i);
    });
  for (auto& th : pool) th.join();
}

struct CellResult {
  std::string dataset;
  std::string method;
  std::size_t k = 0;
  std::optional<EvalReport> report;
  std::string error;
};

/// Dataset names: subdirectories holding the four split files, sorted.
inline std::vector<std::string> benchmark_datasets(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("benchmark directory '" + dir.string() + "' does not exist");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory() && fs::exists(entry.path() / "target-trials.psed"))
      names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  if (names.empty()) throw IoError("no datasets found under '" + dir.string() + "'");
  return names;
}

inline BenchmarkSplits load_splits(const fs::path& dir, std::string name) {
  return BenchmarkSplits{std::move(name), load_dataset(dir / kSplitFiles[0]), load_dataset(dir / kSplitFiles[1]),
                         load_dataset(dir / kSplitFiles[2]), load_dataset(dir / kSplitFiles[3])};
}

inline const char* checkpoint_name(Aggregation a) {
  return a == Aggregation::mean ? "protonet-mean.psfm" : "protonet-attn.psfm";
}

/// Seed of the models trained by compare for one dataset; independent of
/// which other datasets are present.
inline std::uint64_t dataset_seed(std::uint64_t seed, const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) h = (h ^ c) * 0x100000001b3ULL;
  return derive_seed(seed, {h});
}

inline std::string fixed2(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v;
  return s.str();
}

inline std::string render_table(const std::vector<std::string>& datasets, const std::vector<std::string>& methods,
                                const std::vector<std::size_t>& ks, const std::vector<CellResult>& cells,
                                const Json& deltas) {
  std::ostringstream t;
  const int w = 12;
  t << std::left << std::setw(16) << "method" << std::right << std::setw(6) << "k";
  for (const auto& d : datasets) t << std::setw(w) << d;
  t << std::setw(w) << "mean" << "\n";
  for (const auto& m : methods)
    for (std::size_t k : ks) {
      t << std::left << std::setw(16) << m << std::right << std::setw(6) << k;
      double sum = 0.0;
      bool all = true;
      for (const auto& d : datasets) {
        auto it = std::find_if(cells.begin(), cells.end(),
                               [&](const CellResult& c) { return c.dataset == d && c.method == m && c.k == k; });
        if (it != cells.end() && it->report) {
          t << std::setw(w) << fixed2(it->report->aeer);
          sum += it->report->aeer;
        } else {
          t << std::setw(w) << "FAILED";
          all = false;
        }
      }
      t << std::setw(w) << (all ? fixed2(sum / static_cast<double>(datasets.size())) : std::string("-")) << "\n";
    }
  for (const char* key : {"method", "zeroshot"}) {
    if (!deltas.contains(key)) continue;
    t << "\ndelta EER (" << (std::string(key) == "method" ? "mean - attention" : "attention - zero-shot") << ")\n";
    for (const auto& e : deltas[key]) t << "  k=" << std::setw(4) << e["k"].get<std::size_t>() << "  " << fixed2(e["value"].get<double>()) << "\n";
  }
  return t.str();
}

/// Delta summaries recomputed from a list of cells; absent when a needed
/// method is not in the list or any needed cell failed.
inline Json compute_deltas(const std::vector<std::string>& datasets, const std::vector<std::size_t>& ks,
                           const std::vector<CellResult>& cells) {
  auto find = [&](const std::string& d, const std::string& m, std::size_t k) -> const EvalReport* {
    for (const auto& c : cells)
      if (c.dataset == d && c.method == m && c.k == k) return c.report ? &*c.report : nullptr;
    return nullptr;
  };
  Json out = Json::object();
  Json method = Json::array(), zeroshot = Json::array();
  for (std::size_t k : ks) {
    std::vector<EvalReport> proto, attn;
    std::vector<DatasetEer> zs;
    bool have_proto = true, have_attn = true, have_zs = true;
    for (const auto& d : datasets) {
      const EvalReport* p = find(d, "protonet-mean", k);
      const EvalReport* a = find(d, "protonet-attn", k);
      const EvalReport* z = find(d, "zeroshot", k);
      if (p) proto.push_back(*p); else have_proto = false;
      if (a) attn.push_back(*a); else have_attn = false;
      if (z) zs.push_back({d, z->aeer}); else have_zs = false;
    }
    if (have_proto && have_attn) method.push_back({{"k", k}, {"value", delta_eer_method(proto, attn, k)}});
    if (have_attn && have_zs) zeroshot.push_back({{"k", k}, {"value", delta_eer_zeroshot(attn, zs, k)}});
  }
  if (!method.empty()) out["method"] = method;
  if (!zeroshot.empty()) out["zeroshot"] = zeroshot;
  return out;
}

inline Json cell_json(const CellResult& c) {
  Json j = {{"dataset", c.dataset}, {"method", c.method}, {"k", c.k}};
  if (c.report) {
    j["status"] = "ok";
    j["report"] = to_json(*c.report);
  } else {
    j["status"] = "failed";
    j["error"] = c.error;
  }
  return j;
}

inline int cmd_compare(const CompareOptions& o, std::ostream& out) {
  for (const auto& m : o.methods)
    if (!is_method(m)) throw ConfigError("unknown method '" + m + "'");
  if (o.methods.empty() || o.ks.empty()) throw ConfigError("compare needs at least one method and one k");
  if (o.runs == 0) throw ConfigError("compare needs at least one run");
  const auto names = benchmark_datasets(o.benchmark_dir);

  // Phase 1: data and models per dataset.
  struct Prepared {
    std::optional<BenchmarkSplits> splits;
    std::optional<FewShotModel> models[2];  // indexed by Aggregation
    std::string errors[3];                  // data, mean, attention
  };
  std::vector<Prepared> prep(names.size());
  const bool need[2] = {std::count(o.methods.begin(), o.methods.end(), "protonet-mean") > 0,
                        std::count(o.methods.begin(), o.methods.end(), "protonet-attn") > 0 ||
                            std::count(o.methods.begin(), o.methods.end(), "finetune-10") > 0 ||
                            std::count(o.methods.begin(), o.methods.end(), "finetune-100") > 0};
  for (std::size_t i = 0; i < names.size(); ++i) {
    try {
      prep[i].splits = load_splits(o.benchmark_dir / names[i], names[i]);
    } catch (const std::exception& e) {
      prep[i].errors[0] = e.what();
    }
  }
  parallel_for(names.size() * 2, o.jobs, [&](std::size_t t) {
    const std::size_t i = t / 2, a = t % 2;
    if (!need[a]) return;
    Prepared& p = prep[i];
    if (!p.splits) {
      p.errors[1 + a] = p.errors[0];
      return;
    }
    const auto agg = static_cast<Aggregation>(a);
    const fs::path ckpt = o.benchmark_dir / names[i] / checkpoint_name(agg);
    try {
      if (fs::exists(ckpt)) {
        p.models[a] = load_model(ckpt);
      } else if (o.train_missing) {
        TrainConfig tc = o.train_template;
        tc.aggregation = agg;
        tc.seed = dataset_seed(o.seed, names[i]);
        TrainResult r = run_training(p.splits->train, p.splits->valid, tc, Distance::euclidean);
        save_model(r.model, ckpt);
        TrainOptions echo;
        echo.config = tc;
        io::write_file(default_log_path(ckpt), train_log_text(echo, p.splits->train.dim(), r.log));
        p.models[a] = decode_model(encode_model(r.model));  // the saved 32-bit values
      } else {
        throw IoError("checkpoint '" + ckpt.string() + "' is missing (use --train-missing)");
      }
    } catch (const std::exception& e) {
      p.errors[1 + a] = e.what();
    }
  });

  // Phase 2: one task per distinct computation; k-independent methods run
  // once per dataset and are repeated across k rows.
  struct Task {
    std::size_t dataset;
    std::string method;
    std::size_t k;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < names.size(); ++i)
    for (const auto& m : o.methods) {
      if (k_independent(m)) tasks.push_back({i, m, 0});
      else
        for (std::size_t k : o.ks) tasks.push_back({i, m, k});
    }
  std::vector<std::optional<EvalReport>> results(tasks.size());
  std::vector<std::string> errors(tasks.size());
  parallel_for(tasks.size(), o.jobs, [&](std::size_t t) {
    const Task& task = tasks[t];
    const Prepared& p = prep[task.dataset];
    try {
      if (!p.splits) throw IoError(p.errors[0]);
      const BenchmarkSplits& b = *p.splits;
      const std::uint64_t seed = o.seed;
      auto model = [&](Aggregation a) -> const FewShotModel& {
        const auto i = static_cast<std::size_t>(a);
        if (!p.models[i]) throw IoError(p.errors[1 + i]);
        return *p.models[i];
      };
      if (task.method == "zeroshot") results[t] = zero_shot_report(train_zero_shot(b, seed), b, seed);
      else if (task.method == "mahalanobis") results[t] = mahalanobis_report(b, seed);
      else if (task.method == "protonet-mean") results[t] = fewshot_report(model(Aggregation::mean), b, task.k, o.runs, seed);
      else if (task.method == "protonet-attn")
        results[t] = fewshot_report(model(Aggregation::self_attentive), b, task.k, o.runs, seed);
      else if (task.method == "finetune-10") results[t] = finetune_report(model(Aggregation::self_attentive), b, 10, seed);
      else if (task.method == "finetune-100")
        results[t] = finetune_report(model(Aggregation::self_attentive), b, 100, seed);
    } catch (const std::exception& e) {
      errors[t] = e.what();
    }
  });

  std::vector<CellResult> cells;
  bool failed = false;
  for (const auto& m : o.methods)
    for (std::size_t k : o.ks)
      for (std::size_t i = 0; i < names.size(); ++i) {
        std::size_t t = 0;
        while (!(tasks[t].dataset == i && tasks[t].method == m && (tasks[t].k == k || (k_independent(m) && tasks[t].k == 0)))) ++t;
        CellResult c{names[i], m, k, results[t], errors[t]};
        if (c.report) c.report->k = k;
        failed = failed || !c.report;
        cells.push_back(std::move(c));
      }

  std::vector<std::string> ds_names(names.begin(), names.end());
  const Json deltas = compute_deltas(ds_names, o.ks, cells);
  Json cell_list = Json::array();
  for (const auto& c : cells) cell_list.push_back(cell_json(c));
  const Json summary = {{"command", "compare"},
                        {"config",
                         {{"benchmark", o.benchmark_dir.filename().string()},
                          {"datasets", ds_names},
                          {"methods", o.methods},
                          {"k", o.ks},
                          {"runs", o.runs},
                          {"seed", o.seed},
                          {"train_missing", o.train_missing},
                          {"train", to_json(o.train_template)}}},
                        {"cells", cell_list},
                        {"delta_eer", deltas},
                        {"status", failed ? "partial" : "ok"}};
  const fs::path dir = resolve_out_dir(o.out_dir);
  fs::create_directories(dir);
  write_json(dir / "summary.json", summary);
  std::string jsonl;
  for (const auto& c : cell_list) jsonl += c.dump() + "\n";
  io::write_file(dir / "cells.jsonl", jsonl);
  const std::string table = render_table(ds_names, o.methods, o.ks, cells, deltas);
  io::write_file(dir / "table.txt", table);
  out << table;
  for (const auto& c : cells)
    if (!c.report) out << "failed: " << c.dataset << " / " << c.method << " / k=" << c.k << ": " << c.error << "\n";
  return failed ? kPartial : kOk;
}

// ---- verify-report -------------------------------------------------------------

struct VerifyResult {
  std::vector<std::string> problems;
  std::size_t checks = 0;
  bool ok() const { return problems.empty(); }
};

inline void verify_eval_report(const EvalReport& r, const std::string& where, VerifyResult& v) {
  EvalReport again = r;
  summarize(again);
  ++v.checks;
  if (again.runs != r.runs || again.aeer != r.aeer || again.stdev != r.stdev)
    v.problems.push_back(where + ": runs/aeer/std do not match per_run_eer");
  for (double e : r.per_run_eer)
    if (!(e >= 0.0 && e <= 100.0)) v.problems.push_back(where + ": per-run EER outside [0, 100]");
}

/// Re-derives every aggregate in an eval report or a compare summary from
/// the stored per-run values and checks for exact equality.
inline VerifyResult verify_document(const nlohmann::json& doc) {
  VerifyResult v;
  if (doc.contains("per_run_eer")) {
    verify_eval_report(report_from_json(doc), "report", v);
    return v;
  }
  if (!doc.contains("cells") || !doc.contains("delta_eer")) throw FormatError("not a report or compare summary");
  std::vector<CellResult> cells;
  std::vector<std::string> datasets;
  std::vector<std::size_t> ks;
  try {
    datasets = doc.at("config").at("datasets").get<std::vector<std::string>>();
    ks = doc.at("config").at("k").get<std::vector<std::size_t>>();
    for (const auto& c : doc.at("cells")) {
      CellResult cell{c.at("dataset").get<std::string>(), c.at("method").get<std::string>(),
                      c.at("k").get<std::size_t>(), std::nullopt, ""};
      if (c.at("status") == "ok") {
        cell.report = report_from_json(c.at("report"));
        verify_eval_report(*cell.report, cell.dataset + "/" + cell.method + "/k=" + std::to_string(cell.k), v);
      }
      cells.push_back(std::move(cell));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed compare summary: ") + e.what());
  }
  const Json expected = compute_deltas(datasets, ks, cells);
  const Json stored = doc.at("delta_eer");
  ++v.checks;
  if (Json::parse(stored.dump()) != Json::parse(expected.dump()))
    v.problems.push_back("delta_eer does not match the values recomputed from the cells");
  return v;
}

inline int cmd_verify_report(const fs::path& path, std::ostream& out) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  const VerifyResult v = verify_document(doc);
  for (const auto& p : v.problems) out << "mismatch: " << p << "\n";
  out << (v.ok() ? "verified " : "FAILED ") << v.checks << " checks in " << path.string() << "\n";
  return v.ok() ? kOk : kNumeric;
}

}  // namespace protospoof::cli
