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

namespace biofuse::metrics {

// Similarity-oriented scores: a trial is accepted iff score >= threshold.
// Candidate thresholds are every distinct score plus one sentinel just above
// the maximum score (where FAR = 0 and FRR = 1).

struct EerPoint {
  double eer = 0;
  double threshold = 0;
};

// Sweeps the candidates in ascending order and locates the sign change of
// FAR - FRR. An exact crossing returns the shared rate and the midpoint of the
// threshold interval on which it holds; otherwise both rates are linearly
// interpolated between the bracketing candidates. Throws EvalError on empty
// input.
EerPoint compute_eer(std::span<const double> genuine, std::span<const double> impostor);

struct FrrAtFar {
  double far_target = 0;
  double far = 0;
  double frr = 0;
  double threshold = 0;
};

// Smallest candidate threshold whose FAR <= far_target, and the FRR there.
// For far_target = 0 the threshold lies strictly above every impostor score.
FrrAtFar frr_at_far(std::span<const double> genuine, std::span<const double> impostor, double far_target);

struct Rates {
  double far = 0;
  double frr = 0;
};

Rates rates_at(std::span<const double> genuine, std::span<const double> impostor, double threshold);

}  // namespace biofuse::metrics
