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

#include "biofuse/fusion.hpp"
#include "biofuse/metrics/rates.hpp"
#include "biofuse/verify.hpp"

namespace biofuse::metrics {

// One embedded, labelled sample of a test (or calibration) population.
struct EmbeddedSample {
  int subject = 0;  // index into EmbeddedSet::subjects
  int round = 0;
  int dot_index = 0;
  std::vector<float> embedding;
};

struct EmbeddedSet {
  std::vector<std::string> subjects;
  std::vector<EmbeddedSample> samples;
};

struct Trial {
  double score = 0;
  bool genuine = false;
  int claimed = 0;        // subject index of the claimed identity
  int verif_subject = 0;  // subject index of the presented sample
  int verif_round = 0;
  std::size_t verif_sample = 0;
  std::int64_t enroll_sample = -1;  // S1 only
  std::uint64_t enroll_rounds = 0;  // bit r set when round r contributed enrollment material
};

struct TrialSet {
  Scenario scenario = Scenario::S1;
  std::vector<std::string> subjects;
  std::vector<Trial> trials;
  std::vector<std::string> excluded_subjects;  // fewer than two rounds

  std::vector<double> genuine() const;
  std::vector<double> impostor() const;
  std::size_t n_genuine() const;
  std::size_t n_impostor() const;
  // Scores restricted to one claimed identity.
  std::vector<double> genuine_for(int claimed) const;
  std::vector<double> impostor_for(int claimed) const;
};

// Rounds must lie in [0, 64).
// S1: every cross-round (enrollment, verification) pair scored on its own;
//     genuine pairs are unordered, impostor pairs run each verification
//     sample of another subject against each claimed-identity sample.
// S2/S3: per verification sample, best match over all of the claimed
//     identity's samples from other rounds.
TrialSet build_trials(const EmbeddedSet& set, Scenario scenario);

// Pairs two trial sets built from aligned eye and brain embeddings into
// fused scores. With `normalizer` the min-max normalised scores are fused,
// otherwise the raw scores. Throws ContractError when the sets do not align.
TrialSet fuse_trials(const TrialSet& eye, const TrialSet& brain, fusion::Rule rule,
                     const std::optional<fusion::ScoreNormalizer>& normalizer);

std::vector<fusion::ScorePair> score_pairs(const TrialSet& eye, const TrialSet& brain);

EerPoint compute_eer(const TrialSet& trials);
FrrAtFar frr_at_far(const TrialSet& trials, double far_target);

struct PerSubjectEer {
  std::map<std::string, EerPoint> eer;
  std::vector<std::string> skipped;  // missing genuine or impostor trials
  double mean = 0;
  double variance = 0;
};

PerSubjectEer per_subject_eer(const TrialSet& trials);

// Metadata scans; each returns the number of violating trials.
std::size_t audit_round_exclusion(const TrialSet& trials, const EmbeddedSet& set);

struct FoldPlan {
  int k = 0;
  std::vector<std::vector<std::string>> train;
  std::vector<std::vector<std::string>> test;
};

// Seeded shuffle, then k contiguous test groups whose sizes differ by at
// most one. Throws ValidationError when k < 2 or k > subjects.size().
FoldPlan plan_folds(std::vector<std::string> subjects, int k, std::uint64_t seed);

// Violations of: train/test disjoint per fold, test sets disjoint across
// folds, union of test sets equals `subjects`.
std::size_t audit_fold_plan(const FoldPlan& plan, const std::vector<std::string>& subjects);

}  // namespace biofuse::metrics
