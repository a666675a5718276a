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

// protospoof: data generation, training, evaluation and comparison.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "protospoof/cli/commands.hpp"

namespace ps = protospoof;
namespace cli = protospoof::cli;

namespace {

struct Raw {
  std::string objective = "binary";
  std::string aggregation = "attention";
  std::string distance = "euclidean";
  std::string out;
  std::string log;
  std::string out_dir;
  std::string spec;
  std::string methods;
  std::string ks;
};

template <class T>
T require_value(std::optional<T> v, const char* what, const std::string& s) {
  if (!v) throw ps::ConfigError(std::string("unknown ") + what + " '" + s + "'");
  return *v;
}

ps::Distance parse_distance(const std::string& s) {
  if (s == "euclidean") return ps::Distance::euclidean;
  if (s == "squared-euclidean" || s == "squared_euclidean") return ps::Distance::squared_euclidean;
  throw ps::ConfigError("unknown distance '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::optional<std::filesystem::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

void add_train_flags(CLI::App* app, ps::TrainConfig& c, std::string& objective) {
  app->add_option("--epochs", c.epochs, "training epochs")->capture_default_str();
  app->add_option("--episodes", c.episodes_per_epoch, "episodes per epoch")->capture_default_str();
  app->add_option("--support,--k-train", c.support, "support examples per class (K)")->capture_default_str();
  app->add_option("--query", c.query, "query examples per class (Q)")->capture_default_str();
  app->add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--lr-step", c.lr_step, "epochs between learning-rate decays")->capture_default_str();
  app->add_option("--lr-gamma", c.lr_gamma, "learning-rate decay factor")->capture_default_str();
  app->add_option("--objective", objective, "binary | multi-class")->capture_default_str();
  app->add_option("--n-spoof-classes", c.spoof_classes, "spoof classes per multi-class episode")
      ->capture_default_str();
  app->add_option("--validation-episodes", c.validation_episodes, "validation episodes per epoch")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot synthetic speech detection with prototypical networks"};
  app.set_config("--config", "", "INI/TOML file with option defaults; flags take precedence");
  app.require_subcommand(1);
  Raw raw;

  cli::GenDataOptions gen;
  std::optional<std::uint64_t> gen_seed;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic shift benchmark");
  gen_cmd->add_option("--spec", raw.spec, "shift spec file (built-in default when absent)")->check(CLI::ExistingFile);
  gen_cmd->add_option("--out-dir", raw.out_dir, "output directory");
  gen_cmd->add_option("--seed", gen_seed, "master seed; overrides data.seed");

  cli::TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "episodic training of a prototypical network");
  train_cmd->add_option("--train", tr.train, "training split (.psed)")->required();
  train_cmd->add_option("--valid", tr.valid, "validation split (.psed)")->required();
  train_cmd->add_option("--out", raw.out, "checkpoint path (default <out dir>/model.psfm)");
  train_cmd->add_option("--log", raw.log, "JSONL log path (default next to the checkpoint)");
  train_cmd->add_option("--seed", tr.config.seed, "master seed")->required();
  train_cmd->add_option("--aggregation", raw.aggregation, "mean | attention")->capture_default_str();
  train_cmd->add_option("--distance", raw.distance, "euclidean | squared-euclidean")->capture_default_str();
  train_cmd->add_flag("--log-timing", tr.log_timing, "record wall-clock seconds in the log");
  add_train_flags(train_cmd, tr.config, raw.objective);

  cli::EvalOptions ev;
  double corrupt_fraction = 0.0, corrupt_scale = 3.0;
  auto* eval_cmd = app.add_subcommand("eval", "repeated few-shot evaluation of a checkpoint");
  eval_cmd->add_option("--model", ev.model, "checkpoint (.psfm)")->required();
  eval_cmd->add_option("--adapt", ev.adapt, "adaptation split (.psed)")->required();
  eval_cmd->add_option("--trials", ev.trials, "trial split (.psed)")->required();
  eval_cmd->add_option("--out", raw.out, "report path (default <out dir>/report.json)");
  eval_cmd->add_option("--k", ev.k, "support examples per class")->capture_default_str();
  eval_cmd->add_option("--runs", ev.runs, "support draws")->capture_default_str();
  eval_cmd->add_option("--seed", ev.seed, "master seed")->required();
  eval_cmd->add_option("--dataset", ev.dataset, "dataset name in the report (default trials file stem)");
  eval_cmd->add_option("--corrupt-fraction", corrupt_fraction, "fraction of support rows replaced by outliers")
      ->capture_default_str();
  eval_cmd->add_option("--corrupt-scale", corrupt_scale, "outlier spread in adaptation-set deviations")
      ->capture_default_str();

  cli::CompareOptions cmp;
  cmp.train_template.objective = ps::Objective::multi_class;
  raw.methods = "zeroshot,mahalanobis,protonet-mean,protonet-attn,finetune-10,finetune-100";
  raw.ks = "5,10,100";
  std::string cmp_objective = "multi-class";
  auto* cmp_cmd = app.add_subcommand("compare", "run the method x k x dataset matrix");
  cmp_cmd->add_option("--benchmark", cmp.benchmark_dir, "directory of dataset subdirectories")->required();
  cmp_cmd->add_option("--out-dir", raw.out_dir, "output directory");
  cmp_cmd->add_option("--methods", raw.methods, "comma-separated method names")->capture_default_str();
  cmp_cmd->add_option("--ks", raw.ks, "comma-separated support sizes")->capture_default_str();
  cmp_cmd->add_option("--runs", cmp.runs, "support draws per few-shot cell")->capture_default_str();
  cmp_cmd->add_option("--seed", cmp.seed, "master seed")->required();
  cmp_cmd->add_option("--jobs", cmp.jobs, "worker threads")->capture_default_str();
  cmp_cmd->add_flag("--train-missing", cmp.train_missing, "train absent checkpoints");
  add_train_flags(cmp_cmd, cmp.train_template, cmp_objective);

  std::string verify_path;
  auto* verify_cmd = app.add_subcommand("verify-report", "re-derive aggregates of a report or compare summary");
  verify_cmd->add_option("report", verify_path, "report.json or summary.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kUsage;
  }

  try {
    if (*gen_cmd) {
      gen.spec_path = opt_path(raw.spec);
      gen.out_dir = opt_path(raw.out_dir);
      gen.seed = gen_seed;
      return cli::cmd_gen_data(gen, std::cout);
    }
    if (*train_cmd) {
      tr.config.objective = require_value(ps::parse_objective(raw.objective), "objective", raw.objective);
      tr.config.aggregation = require_value(ps::parse_aggregation(raw.aggregation), "aggregation", raw.aggregation);
      tr.distance = parse_distance(raw.distance);
      tr.out = opt_path(raw.out);
      tr.log = opt_path(raw.log);
      return cli::cmd_train(tr, std::cout);
    }
    if (*eval_cmd) {
      ev.out = opt_path(raw.out);
      ev.corruption = {corrupt_fraction, corrupt_scale};
      return cli::cmd_eval(ev, std::cout);
    }
    if (*cmp_cmd) {
      cmp.out_dir = opt_path(raw.out_dir);
      cmp.methods = split_list(raw.methods);
      cmp.ks.clear();
      for (const auto& k : split_list(raw.ks)) {
        try {
          std::size_t pos = 0;
          const unsigned long v = std::stoul(k, &pos);
          if (pos != k.size() || v == 0) throw std::invalid_argument(k);
          cmp.ks.push_back(v);
        } catch (const std::logic_error&) {
          throw ps::ConfigError("invalid k '" + k + "'");
        }
      }
      cmp.train_template.objective = require_value(ps::parse_objective(cmp_objective), "objective", cmp_objective);
      return cli::cmd_compare(cmp, std::cout);
    }
    if (*verify_cmd) return cli::cmd_verify_report(verify_path, std::cout);
  } catch (const ps::Error& e) {
    std::cerr << "protospoof: " << e.what() << "\n";
    return cli::exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "protospoof: io error: " << e.what() << "\n";
    return cli::kData;
  } catch (const std::exception& e) {
    std::cerr << "protospoof: " << e.what() << "\n";
    return cli::kData;
  }
  return cli::kUsage;
}
