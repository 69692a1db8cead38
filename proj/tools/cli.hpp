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

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "biofuse/corpus.hpp"
#include "biofuse/metrics/experiment.hpp"
#include "biofuse/preprocess.hpp"
#include "biofuse/tnn/train.hpp"
#include "biofuse/verify.hpp"

namespace biofuse::cli {

struct RunPaths {
  std::string corpus;
  std::string dataset;    // directory of <modality>.ds files
  std::string models;     // directory of <modality>.model files
  std::string templates;
  std::string report;     // JSON; the TSV table goes next to it
};

struct RunConfig {
  RunPaths paths;
  SynthConfig synth;
  NanPolicy nan_policy;
  tnn::TrainConfig train;
  metrics::ExperimentConfig eval;  // nan_policy and train are copied in by sync()
  Scenario scenario = Scenario::S2;

  void sync();
  void validate() const;  // throws ValidationError
};

// JSON with optional sections paths, synth, nan_policy, train, eval.
// Unknown keys and wrong types raise ValidationError.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

// Runs one subcommand. Exit codes: 0 success, 1 validation or usage error,
// 2 runtime error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace biofuse::cli
