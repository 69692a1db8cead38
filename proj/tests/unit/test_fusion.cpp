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

#include <random>

#include "biofuse/error.hpp"
#include "biofuse/fusion.hpp"

using namespace biofuse;
using namespace biofuse::fusion;

TEST_CASE("min-max normalisation") {
  const std::vector<ScorePair> cal{{-10, -4}, {-2, 0}, {-6, -1}};
  const ScoreNormalizer n = fit_normalizer(cal);
  CHECK(n.eye_min == -10);
  CHECK(n.eye_max == -2);
  CHECK(n.normalize({-6, -2}).eye == 0.5);
  CHECK(n.normalize({-6, -2}).brain == 0.5);
  CHECK(n.normalize({-20, 3}).eye == 0.0);
  CHECK(n.normalize({-20, 3}).brain == 1.0);
}

TEST_CASE("normaliser fit errors") {
  CHECK_THROWS_AS(fit_normalizer(std::vector<ScorePair>{}), FitError);
  CHECK_THROWS_AS(fit_normalizer(std::vector<ScorePair>{{-1, -2}, {-1, -3}}), FitError);
  CHECK_THROWS_AS(fit_normalizer(std::vector<ScorePair>{{-1, -2}, {-3, -2}}), FitError);
  CHECK_THROWS_AS(fit_normalizer(std::vector<ScorePair>{{-1, -2}, {std::nan(""), -3}}), FitError);
}

TEST_CASE("fusion rules") {
  const ScorePair p{0.8, 0.6};
  CHECK(fuse(p, Rule::Max) == 0.8);
  CHECK(fuse(p, Rule::Min) == 0.6);
  CHECK(fuse(p, Rule::Mean) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(fuse(p, Rule::Product) == doctest::Approx(0.48).epsilon(1e-15));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng), s = u(rng);
    REQUIRE(fuse({x, x}, Rule::Mean) == x);
    REQUIRE(fuse({x, x}, Rule::Min) == x);
    REQUIRE(fuse({x, x}, Rule::Max) == x);
    REQUIRE(fuse({1.0, s}, Rule::Product) == s);
    for (Rule r : {Rule::Max, Rule::Min, Rule::Mean, Rule::Product}) {
      const double f = fuse({x, s}, r);
      REQUIRE(f >= 0);
      REQUIRE(f <= 1);
    }
  }
  CHECK_THROWS_AS(fuse({1.2, 0.5}, Rule::Mean), ContractError);
  CHECK_THROWS_AS(fuse({0.5, -0.1}, Rule::Max), ContractError);
  CHECK_THROWS_AS(fuse({std::nan(""), 0.5}, Rule::Min), ContractError);
  CHECK(fuse_raw({-3, -1}, Rule::Mean) == -2);
  CHECK(fuse_raw({-3, -1}, Rule::Product) == 3);
  for (Rule r : {Rule::Max, Rule::Min, Rule::Mean, Rule::Product}) CHECK(parse_rule(rule_tag(r)) == r);
  CHECK_THROWS_AS(parse_rule("sum"), ValidationError);
}
