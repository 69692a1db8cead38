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

#include <algorithm>
#include <cmath>
#include <string>

#include "biofuse/error.hpp"
#include "biofuse/fusion.hpp"

namespace biofuse::fusion {
namespace {

double scale(double v, double lo, double hi) { return std::clamp((v - lo) / (hi - lo), 0.0, 1.0); }

double combine(double a, double b, Rule rule) {
  switch (rule) {
    case Rule::Max: return std::max(a, b);
    case Rule::Min: return std::min(a, b);
    case Rule::Mean: return 0.5 * (a + b);
    case Rule::Product: return a * b;
  }
  return 0;
}

}  // namespace

std::string_view rule_tag(Rule r) {
  switch (r) {
    case Rule::Max: return "max";
    case Rule::Min: return "min";
    case Rule::Mean: return "mean";
    case Rule::Product: return "product";
  }
  return "?";
}

Rule parse_rule(std::string_view tag) {
  if (tag == "max") return Rule::Max;
  if (tag == "min") return Rule::Min;
  if (tag == "mean") return Rule::Mean;
  if (tag == "product") return Rule::Product;
  throw ValidationError("unknown fusion rule '" + std::string(tag) + "'");
}

ScorePair ScoreNormalizer::normalize(const ScorePair& p) const {
  return {scale(p.eye, eye_min, eye_max), scale(p.brain, brain_min, brain_max)};
}

ScoreNormalizer fit_normalizer(std::span<const ScorePair> calibration) {
  if (calibration.empty()) throw FitError("fit_normalizer: no calibration scores");
  ScoreNormalizer n{calibration[0].eye, calibration[0].eye, calibration[0].brain, calibration[0].brain};
  for (const auto& p : calibration) {
    if (!std::isfinite(p.eye) || !std::isfinite(p.brain)) throw FitError("fit_normalizer: non-finite score");
    n.eye_min = std::min(n.eye_min, p.eye);
    n.eye_max = std::max(n.eye_max, p.eye);
    n.brain_min = std::min(n.brain_min, p.brain);
    n.brain_max = std::max(n.brain_max, p.brain);
  }
  if (!(n.eye_max > n.eye_min)) throw FitError("fit_normalizer: eye scores are constant");
  if (!(n.brain_max > n.brain_min)) throw FitError("fit_normalizer: brain scores are constant");
  return n;
}

double fuse(const ScorePair& p, Rule rule) {
  if (!(p.eye >= 0 && p.eye <= 1 && p.brain >= 0 && p.brain <= 1))
    throw ContractError("fuse: normalized scores must lie in [0, 1]");
  return combine(p.eye, p.brain, rule);
}

double fuse_raw(const ScorePair& p, Rule rule) { return combine(p.eye, p.brain, rule); }

}  // namespace biofuse::fusion
