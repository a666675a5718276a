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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>

#include <json.hpp>

#include "protospoof/binary_io.hpp"
#include "protospoof/episodes/dataset.hpp"

namespace protospoof {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code = -1;
  std::string output;
};

Result run(const std::string& args) {
  const char* bin = std::getenv("PROTOSPOOF_BIN");
  if (bin == nullptr) throw std::runtime_error("PROTOSPOOF_BIN is not set");
  const std::string cmd = std::string("'") + bin + "' " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) throw std::runtime_error("popen failed");
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

json read_json(const fs::path& p) { return json::parse(io::read_file(p)); }

std::vector<json> read_jsonl(const fs::path& p) {
  std::vector<json> out;
  std::istringstream in(io::read_file(p));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("protospoof_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    data_ = root_ / "data";
    const Result r = run("gen-data --out-dir " + q(data_));
    ASSERT_EQ(r.code, 0) << r.output;
    const Result t = run("train --train " + q(data_ / "source-train.psed") + " --valid " + q(data_ / "source-valid.psed") +
                         " --out " + q(root_ / "small.psfm") + " --seed 5 --epochs 2 --episodes 5");
    ASSERT_EQ(t.code, 0) << t.output;
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static fs::path root_, data_;
};

fs::path Cli::root_, Cli::data_;

TEST_F(Cli, GenDataWritesLoadableFiles) {
  for (const char* f : {"source.psed", "target.psed", "source-train.psed", "source-valid.psed", "target-adapt.psed",
                        "target-trials.psed"})
    EXPECT_NO_THROW(load_dataset(data_ / f)) << f;
  EXPECT_EQ(load_dataset(data_ / "source.psed").size(), 3000u);
  EXPECT_EQ(load_dataset(data_ / "target.psed").size(), 2000u);
  const json m = read_json(data_ / "manifest.json");
  EXPECT_EQ(m["command"], "gen-data");
  EXPECT_EQ(m["seed"], 1);
  EXPECT_EQ(m["heldout_label"], "spoof_4");
  EXPECT_EQ(m["files"].size(), 6u);
}

TEST_F(Cli, GenDataIsByteIdentical) {
  const fs::path again = root_ / "again";
  ASSERT_EQ(run("gen-data --out-dir " + q(again)).code, 0);
  for (const auto& e : fs::directory_iterator(data_)) {
    if (e.path().extension() == ".psfm" || e.path().extension() == ".jsonl") continue;
    EXPECT_EQ(io::read_file(e.path()), io::read_file(again / e.path().filename())) << e.path();
  }
}

TEST_F(Cli, GenDataRejectsUnknownKey) {
  const fs::path spec = root_ / "bad.ini";
  io::write_file(spec, "[data]\nseed = 2\n[shift]\nrotaton_deg = 10\n");
  const Result r = run("gen-data --spec " + q(spec) + " --out-dir " + q(root_ / "bad"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("rotaton_deg"), std::string::npos) << r.output;
}

TEST_F(Cli, GenDataSeedFromFlag) {
  const fs::path spec = root_ / "noseed.ini";
  io::write_file(spec, "[shift]\nrotation_deg = 10\n");
  EXPECT_EQ(run("gen-data --spec " + q(spec) + " --out-dir " + q(root_ / "noseed")).code, 2);
  const Result r = run("gen-data --spec " + q(spec) + " --seed 4 --out-dir " + q(root_ / "seeded"));
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(read_json(root_ / "seeded" / "manifest.json")["seed"], 4);
}

TEST_F(Cli, TrainEchoesDefaults) {
  const auto log = read_jsonl(root_ / "small.log.jsonl");
  ASSERT_EQ(log.size(), 4u);
  const json c = log[0]["config"];
  EXPECT_EQ(log[0]["type"], "config");
  EXPECT_EQ(c["k"], 5);
  EXPECT_EQ(c["q"], 15);
  EXPECT_EQ(c["lr"], 1e-3);
  EXPECT_EQ(c["lr_step"], 20);
  EXPECT_EQ(c["lr_gamma"], 0.5);
  EXPECT_EQ(c["seed"], 5);
  EXPECT_EQ(c["aggregation"], "attention");
  EXPECT_EQ(c["epochs"], 2);
  EXPECT_EQ(log[1]["type"], "epoch");
  EXPECT_FALSE(log[1].contains("wall_seconds"));
  EXPECT_EQ(log[3]["type"], "summary");
  // unspecified schedule flags keep their defaults
  const Result h = run("train --help");
  EXPECT_NE(h.output.find("100"), std::string::npos);
}

TEST_F(Cli, TrainHonoursMultiClassFlags) {
  const fs::path out = root_ / "multi.psfm";
  const Result r = run("train --train " + q(data_ / "source-train.psed") + " --valid " + q(data_ / "source-valid.psed") +
                       " --out " + q(out) + " --seed 6 --epochs 1 --episodes 2 --objective multi-class --n-spoof-classes 2");
  ASSERT_EQ(r.code, 0) << r.output;
  const json c = read_jsonl(root_ / "multi.log.jsonl")[0]["config"];
  EXPECT_EQ(c["objective"], "multi-class");
  EXPECT_EQ(c["n_spoof_classes"], 2);
}

TEST_F(Cli, TrainMissingFileNamesPath) {
  const fs::path missing = root_ / "nowhere.psed";
  const Result r = run("train --train " + q(missing) + " --valid " + q(data_ / "source-valid.psed") + " --seed 1");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.output.find(missing.string()), std::string::npos) << r.output;
  EXPECT_EQ(run("train --valid x --seed 1").code, 2);
}

TEST_F(Cli, EvalIsReproducible) {
  const std::string base = "eval --model " + q(root_ / "small.psfm") + " --adapt " + q(data_ / "target-adapt.psed") +
                           " --trials " + q(data_ / "target-trials.psed") + " --k 5 --runs 100 --seed 3 --out ";
  ASSERT_EQ(run(base + q(root_ / "r1.json")).code, 0);
  ASSERT_EQ(run(base + q(root_ / "r2.json")).code, 0);
  EXPECT_EQ(io::read_file(root_ / "r1.json"), io::read_file(root_ / "r2.json"));
  const json r = read_json(root_ / "r1.json");
  EXPECT_EQ(r["per_run_eer"].size(), 100u);
  EXPECT_EQ(r["k"], 5);
  EXPECT_EQ(r["config"]["seed"], 3);
  EXPECT_EQ(run("verify-report " + q(root_ / "r1.json")).code, 0);
}

TEST_F(Cli, EvalRejectsOversizedSupport) {
  const Result r = run("eval --model " + q(root_ / "small.psfm") + " --adapt " + q(data_ / "target-adapt.psed") +
                       " --trials " + q(data_ / "target-trials.psed") + " --k 1000 --runs 2 --seed 3 --out " +
                       q(root_ / "big.json"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.output.find("sampling"), std::string::npos) << r.output;
}

TEST_F(Cli, CompareMatrixShapeAndVerification) {
  const fs::path bench = root_ / "bench";
  for (const char* name : {"alpha", "beta"}) {
    const fs::path spec = root_ / (std::string(name) + ".ini");
    io::write_file(spec, std::string("[data]\nseed = ") + (name[0] == 'a' ? "11" : "12") + "\n");
    ASSERT_EQ(run("gen-data --spec " + q(spec) + " --out-dir " + q(bench / name)).code, 0);
  }
  const fs::path out = root_ / "cmp";
  const Result r = run("compare --benchmark " + q(bench) + " --out-dir " + q(out) +
                       " --ks 5,10,100 --runs 3 --seed 9 --jobs 2 --train-missing --epochs 2 --episodes 5");
  ASSERT_EQ(r.code, 0) << r.output;
  const json s = read_json(out / "summary.json");
  std::map<std::string, std::size_t> rows;
  for (const auto& c : s["cells"]) {
    ++rows[c["method"].get<std::string>()];
    EXPECT_EQ(c["status"], "ok");
  }
  EXPECT_EQ(rows.size(), 6u);
  for (const auto& [method, n] : rows) EXPECT_EQ(n, 6u) << method;
  EXPECT_EQ(s["delta_eer"]["method"].size(), 3u);
  EXPECT_EQ(s["delta_eer"]["zeroshot"].size(), 3u);
  EXPECT_EQ(read_jsonl(out / "cells.jsonl").size(), 36u);
  EXPECT_TRUE(fs::exists(out / "table.txt"));
  EXPECT_EQ(run("verify-report " + q(out / "summary.json")).code, 0);

  // deltas recomputed from the per-cell aEERs
  for (const auto& d : s["delta_eer"]["method"]) {
    double sum = 0.0;
    for (const char* ds : {"alpha", "beta"}) {
      double mean = 0.0, attn = 0.0;
      for (const auto& c : s["cells"])
        if (c["dataset"] == ds && c["k"] == d["k"]) {
          if (c["method"] == "protonet-mean") mean = c["report"]["aeer"];
          if (c["method"] == "protonet-attn") attn = c["report"]["aeer"];
        }
      sum += mean - attn;
    }
    EXPECT_NEAR(d["value"].get<double>(), sum / 2.0, 1e-12);
  }

  json tampered = s;
  tampered["cells"][0]["report"]["aeer"] = tampered["cells"][0]["report"]["aeer"].get<double>() + 1.0;
  io::write_file(root_ / "tampered.json", tampered.dump());
  EXPECT_EQ(run("verify-report " + q(root_ / "tampered.json")).code, 4);
  json shifted = s;
  shifted["delta_eer"]["method"][0]["value"] = shifted["delta_eer"]["method"][0]["value"].get<double>() + 1e-9;
  io::write_file(root_ / "shifted.json", shifted.dump());
  EXPECT_EQ(run("verify-report " + q(root_ / "shifted.json")).code, 4);
  io::write_file(root_ / "broken.json", "{\"cells\": [");
  EXPECT_EQ(run("verify-report " + q(root_ / "broken.json")).code, 3);

  const Result again = run("compare --benchmark " + q(bench) + " --out-dir " + q(root_ / "cmp1") +
                           " --ks 5,10,100 --runs 3 --seed 9 --jobs 1");
  ASSERT_EQ(again.code, 0) << again.output;
  EXPECT_EQ(io::read_file(out / "cells.jsonl"), io::read_file(root_ / "cmp1" / "cells.jsonl"));
}

TEST_F(Cli, CompareRejectsUnknownMethod) {
  const Result r = run("compare --benchmark " + q(root_) + " --methods zeroshot,protonet-max --seed 1 --out-dir " +
                       q(root_ / "unk"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("protonet-max"), std::string::npos) << r.output;
}

TEST_F(Cli, MalformedDatasetIsDataError) {
  io::write_file(root_ / "junk.psed", "PSED this is not a dataset");
  const Result r = run("train --train " + q(root_ / "junk.psed") + " --valid " + q(data_ / "source-valid.psed") + " --seed 1");
  EXPECT_EQ(r.code, 3) << r.output;
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("train --train a --valid b --seed 1 --aggregation median").code, 2);
}

}  // namespace
}  // namespace protospoof
