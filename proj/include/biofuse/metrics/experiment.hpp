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

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biofuse/corpus.hpp"
#include "biofuse/fusion.hpp"
#include "biofuse/metrics/trials.hpp"
#include "biofuse/preprocess.hpp"
#include "biofuse/tnn/train.hpp"

namespace biofuse::metrics {

enum class ModelKind { Brain, Eye, EyePupil, FusionA, FusionB };
std::string_view model_kind_tag(ModelKind k);  // brain, eye, eye-pupil, fusion-a, fusion-b
ModelKind parse_model_kind(std::string_view tag);

struct ExperimentConfig {
  ModelKind model = ModelKind::Brain;
  // Score fusion of a brain model with the eye model named by `model`
  // (eye or eye-pupil). Single-modality arms are reported alongside.
  std::optional<fusion::Rule> fusion;
  bool raw_score_fusion = false;
  // Eye variant used by fusion-a / fusion-b.
  Modality fusion_eye = Modality::EyeWithPupil;
  int folds = 6;
  std::uint64_t fold_seed = 1;
  NanPolicy nan_policy;
  tnn::TrainConfig train;

  void validate() const;  // throws ValidationError
};

struct ScenarioMetrics {
  Scenario scenario = Scenario::S1;
  // S1/S2: EER over the scenario's pooled scores. S3: mean per-subject EER.
  double eer = 0;
  double eer_threshold = 0;  // S1/S2 only
  double pooled_eer = 0;
  double fold_mean_eer = 0;  // pooled section only
  // FAR targets 1%, 0.1%, 0%. S3: mean over subjects at their own thresholds.
  std::vector<FrrAtFar> frr_at_far;
  PerSubjectEer per_subject;
  std::map<std::string, double> per_user_thresholds;  // S3
  Rates tailored_rates;                               // S3: pooled FAR/FRR at per-user thresholds
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
  std::size_t round_violations = 0;
  std::vector<std::string> excluded_subjects;
};

// One reported configuration: a single model ("brain"), a feature-fusion
// model ("fusion-a:eye-pupil") or a score-fusion rule ("fused-mean").
struct ArmReport {
  std::string name;
  std::vector<ScenarioMetrics> scenarios;  // S1, S2, S3

  const ScenarioMetrics& at(Scenario s) const;
};

struct ModelSummary {
  std::string tag;
  std::vector<double> epoch_loss;
};

struct FoldReport {
  int fold = 0;
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
  std::vector<ModelSummary> models;
  std::vector<ArmReport> arms;
  std::size_t subject_violations = 0;
};

struct EvalReport {
  ExperimentConfig config;
  std::string kernels;
  std::vector<PreprocessReport> preprocess;
  std::size_t fold_plan_violations = 0;
  std::vector<FoldReport> folds;
  std::vector<ArmReport> pooled;

  const ArmReport& arm(const std::string& name) const;  // pooled arm; throws EvalError
  std::string to_json() const;   // stable key order
  std::string to_table() const;  // TSV rows: arm, scenario, metric, value
};

struct ExperimentResult {
  EvalReport report;
  std::vector<std::vector<tnn::EmbeddingModel>> models;  // [fold][model]
};

// Keeps only the (subject, round, dot) events present in every set, so that
// position i refers to the same dot hit in each. Throws EvalError when the
// surviving orders differ.
void align_samples(std::span<std::vector<Sample>* const> sets);

// Per fold: fit standardizers on the training subjects, train, embed the
// test subjects, score S1/S2/S3 trials and compute every metric; then pool.
ExperimentResult run_experiment(const std::vector<Recording>& corpus, const ExperimentConfig& cfg);

}  // namespace biofuse::metrics
