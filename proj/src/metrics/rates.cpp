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
#include <cstdint>
#include <limits>
#include <vector>

#include "biofuse/error.hpp"
#include "biofuse/metrics/rates.hpp"

namespace biofuse::metrics {
namespace {

struct Sweep {
  std::vector<double> thresholds;  // ascending, last one is the sentinel
  std::vector<std::int64_t> n_far;  // impostors accepted at each threshold
  std::vector<std::int64_t> n_frr;  // genuine rejected at each threshold
  std::int64_t n_gen = 0;
  std::int64_t n_imp = 0;
};

Sweep sweep(std::span<const double> genuine, std::span<const double> impostor) {
  if (genuine.empty() || impostor.empty()) throw EvalError("rates: genuine and impostor scores must be non-empty");
  std::vector<double> gen(genuine.begin(), genuine.end());
  std::vector<double> imp(impostor.begin(), impostor.end());
  for (double v : gen)
    if (std::isnan(v)) throw EvalError("rates: NaN score");
  for (double v : imp)
    if (std::isnan(v)) throw EvalError("rates: NaN score");
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());

  Sweep s;
  s.n_gen = static_cast<std::int64_t>(gen.size());
  s.n_imp = static_cast<std::int64_t>(imp.size());
  std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(), std::back_inserter(s.thresholds));
  s.thresholds.erase(std::unique(s.thresholds.begin(), s.thresholds.end()), s.thresholds.end());
  s.thresholds.push_back(std::nextafter(s.thresholds.back(), std::numeric_limits<double>::infinity()));

  std::size_t gi = 0, ii = 0;
  for (double t : s.thresholds) {
    while (gi < gen.size() && gen[gi] < t) ++gi;
    while (ii < imp.size() && imp[ii] < t) ++ii;
    s.n_frr.push_back(static_cast<std::int64_t>(gi));
    s.n_far.push_back(s.n_imp - static_cast<std::int64_t>(ii));
  }
  return s;
}

}  // namespace

EerPoint compute_eer(std::span<const double> genuine, std::span<const double> impostor) {
  const Sweep s = sweep(genuine, impostor);
  const double ng = static_cast<double>(s.n_gen);
  const double ni = static_cast<double>(s.n_imp);
  // sign(FAR - FRR) in exact integer arithmetic
  auto sign = [&](std::size_t k) {
    const std::int64_t lhs = s.n_far[k] * s.n_gen;
    const std::int64_t rhs = s.n_frr[k] * s.n_imp;
    return lhs > rhs ? 1 : lhs < rhs ? -1 : 0;
  };
  std::size_t j = 0;
  while (sign(j) > 0) ++j;  // the sentinel has FAR 0, FRR 1
  // j >= 1: at the smallest score FAR = 1 and FRR = 0.
  const double far_lo = s.n_far[j - 1] / ni, frr_lo = s.n_frr[j - 1] / ng;
  const double far_hi = s.n_far[j] / ni, frr_hi = s.n_frr[j] / ng;
  if (sign(j) == 0) {
    std::size_t k = j;
    while (k + 1 < s.thresholds.size() && sign(k + 1) == 0) ++k;
    return {far_hi, 0.5 * (s.thresholds[j - 1] + s.thresholds[k])};
  }
  const double a = far_lo - frr_lo;
  const double b = far_hi - frr_hi;
  const double w = a / (a - b);
  return {far_lo + w * (far_hi - far_lo), s.thresholds[j - 1] + w * (s.thresholds[j] - s.thresholds[j - 1])};
}

FrrAtFar frr_at_far(std::span<const double> genuine, std::span<const double> impostor, double far_target) {
  if (!(far_target >= 0 && far_target <= 1)) throw EvalError("frr_at_far: target must lie in [0, 1]");
  const Sweep s = sweep(genuine, impostor);
  const double ng = static_cast<double>(s.n_gen);
  const double ni = static_cast<double>(s.n_imp);
  std::size_t k = 0;
  while (static_cast<double>(s.n_far[k]) / ni > far_target) ++k;
  return {far_target, s.n_far[k] / ni, s.n_frr[k] / ng, s.thresholds[k]};
}

Rates rates_at(std::span<const double> genuine, std::span<const double> impostor, double threshold) {
  if (genuine.empty() || impostor.empty()) throw EvalError("rates: genuine and impostor scores must be non-empty");
  const auto rejected = std::count_if(genuine.begin(), genuine.end(), [&](double v) { return v < threshold; });
  const auto accepted = std::count_if(impostor.begin(), impostor.end(), [&](double v) { return v >= threshold; });
  return {static_cast<double>(accepted) / static_cast<double>(impostor.size()),
          static_cast<double>(rejected) / static_cast<double>(genuine.size())};
}

}  // namespace biofuse::metrics
