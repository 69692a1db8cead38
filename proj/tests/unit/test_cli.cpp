// Copyright 2026 The biofuse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "biofuse/error.hpp"
#include "biofuse/preprocess.hpp"
#include "cli.hpp"
#include "unit/common.hpp"

using namespace biofuse;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "biofuse");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string write_config(const testing::TempDir& dir, const std::string& eval) {
  const std::string p = (dir / "run.json").string();
  std::ofstream(p) << R"({"paths":{"corpus":")" << (dir / "corpus.txt").string() << R"(","dataset":")"
                   << (dir / "ds").string() << R"(","models":")" << (dir / "models").string()
                   << R"(","templates":")" << (dir / "tpl.bin").string() << R"(","report":")"
                   << (dir / "report.json").string() << R"("},
 "synth":{"n_subjects":8,"n_rounds":3,"dots_per_round":10,"seed":3},
 "train":{"epochs":2,"batch_size":16},
 "eval":)" << eval << "}";
  return p;
}

}  // namespace

TEST_CASE("gen, preprocess and evaluate") {
  testing::TempDir dir("cli-eval");
  const std::string cfg = write_config(dir, R"({"modality":"eye","fusion":"mean","folds":2,"scenario":"s3"})");
  Result r = call({"gen", "--config", cfg});
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(dir / "corpus.txt"));
  const std::string corpus = testing::slurp(dir / "corpus.txt");
  REQUIRE(call({"gen", "--config", cfg, "--out", (dir / "again.txt").string()}).code == 0);
  CHECK(testing::slurp(dir / "again.txt") == corpus);

  r = call({"preprocess", "--config", cfg});
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(dir / "ds" / "eye.ds"));
  CHECK(std::filesystem::exists(dir / "ds" / "brain.ds"));

  r = call({"evaluate", "--config", cfg});
  REQUIRE(r.code == 0);
  const auto report = nlohmann::json::parse(testing::slurp(dir / "report.json"));
  CHECK(report.at("format") == "BIOFUSE-REPORT v1");
  CHECK(report.at("folds").size() == 2);
  CHECK(report.at("config").at("fusion") == "mean");
  CHECK(std::filesystem::exists(dir / "report.json.tsv"));
  const std::string first = testing::slurp(dir / "report.json");
  REQUIRE(call({"evaluate", "--config", cfg}).code == 0);
  CHECK(testing::slurp(dir / "report.json") == first);
}

TEST_CASE("train, enroll and verify") {
  testing::TempDir dir("cli-verify");
  const std::string cfg = write_config(dir, R"({"modality":"brain","folds":2})");
  REQUIRE(call({"gen", "--config", cfg}).code == 0);
  REQUIRE(call({"preprocess", "--config", cfg}).code == 0);
  Result r = call({"train", "--config", cfg, "--holdout", "S07,S08"});
  REQUIRE(r.code == 0);
  REQUIRE(std::filesystem::exists(dir / "models" / "brain.model"));
  r = call({"enroll", "--config", cfg, "--subjects", "S07,S08"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("2 identities") != std::string::npos);

  const auto data = read_dataset(dir / "ds" / "brain.ds");
  std::size_t idx = 0;
  while (data[idx].subject_id != "S07") ++idx;
  const std::string index = std::to_string(idx);

  r = call({"verify", "--config", cfg, "--index", index, "--claim", "S07", "--threshold", "-1000"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("ACCEPT claim=S07", 0) == 0);
  // Similarities are negated distances, so a positive threshold rejects everything.
  r = call({"verify", "--config", cfg, "--index", index, "--claim", "S07", "--threshold", "0.5"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("REJECT claim=S07", 0) == 0);
  CHECK(r.out.find("scenario=s2") != std::string::npos);

  std::ofstream(dir / "th.json") << R"({"S07":-1000,"S08":0})";
  r = call({"verify", "--config", cfg, "--index", index, "--claim", "S07", "--scenario", "s3", "--thresholds",
            (dir / "th.json").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("ACCEPT", 0) == 0);
  r = call({"verify", "--config", cfg, "--index", index, "--claim", "S01", "--threshold", "-1"});
  CHECK(r.code == 2);
  CHECK(r.err.find("S01") != std::string::npos);
}

TEST_CASE("usage and config errors") {
  testing::TempDir dir("cli-err");
  Result r = call({"evaluate", "--config", (dir / "missing.json").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("missing.json") != std::string::npos);

  r = call({"evaluate", "--bogus"});
  CHECK(r.code == 1);
  CHECK(!r.err.empty());
  CHECK(call({}).code == 1);
  CHECK(call({"frobnicate"}).code == 1);

  const std::string cfg = write_config(dir, R"({"modality":"brain","folds":2})");
  r = call({"evaluate", "--config", cfg});
  CHECK(r.code == 2);  // no corpus on disk yet

  CHECK_THROWS_AS(cli::parse_run_config(R"({"synth":{"n_subject":8}})"), ValidationError);
  CHECK_THROWS_AS(cli::parse_run_config(R"({"colour":1})"), ValidationError);
  CHECK_THROWS_AS(cli::parse_run_config(R"({"train":{"epochs":"two"}})"), ValidationError);
  CHECK_THROWS_AS(cli::parse_run_config(R"({"eval":{"modality":"brain","fusion":"mean"}})"), ValidationError);
  CHECK_THROWS_AS(cli::parse_run_config("{"), ValidationError);
  CHECK_THROWS_AS(cli::parse_run_config(R"({"paths":{"corpus":"a","report":"a"}})"), ValidationError);

  const cli::RunConfig ok = cli::parse_run_config(
      R"({"nan_policy":{"max_nan_fraction":0.1},"train":{"epochs":4},"eval":{"modality":"eye-pupil","fusion":"max","scenario":"s3"}})");
  CHECK(ok.eval.nan_policy.max_nan_fraction == 0.1);
  CHECK(ok.eval.train.epochs == 4);
  CHECK(ok.eval.model == metrics::ModelKind::EyePupil);
  CHECK(ok.scenario == Scenario::S3);
}
