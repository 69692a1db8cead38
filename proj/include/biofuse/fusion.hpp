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

#include <span>
#include <string_view>

namespace biofuse::fusion {

// Per-modality similarity scores for one (verification event, claimed
// identity) trial.
struct ScorePair {
  double eye = 0;
  double brain = 0;
};

enum class Rule { Max, Min, Mean, Product };

std::string_view rule_tag(Rule r);  // "max", "min", "mean", "product"
Rule parse_rule(std::string_view tag);

// Min-max bounds per modality fitted on calibration scores.
struct ScoreNormalizer {
  double eye_min = 0, eye_max = 1;
  double brain_min = 0, brain_max = 1;

  // Maps into [0, 1]^2, clamping scores outside the fitted range.
  ScorePair normalize(const ScorePair& p) const;
};

// Throws FitError when either modality has fewer than two distinct scores.
ScoreNormalizer fit_normalizer(std::span<const ScorePair> calibration);

// Inputs must lie in [0, 1]; throws ContractError otherwise.
double fuse(const ScorePair& normalized, Rule rule);

// Same combiners on raw (unnormalised) scores, no range contract.
double fuse_raw(const ScorePair& raw, Rule rule);

}  // namespace biofuse::fusion
