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

#include <cmath>
#include <fstream>
#include <random>

#include "biofuse/error.hpp"
#include "biofuse/verify.hpp"
#include "oracles.hpp"
#include "unit/common.hpp"

using namespace biofuse;

namespace {

Template tpl(const std::string& id, std::vector<float> v, int round, std::string arch = "brain") {
  return {id, std::move(v), round, std::move(arch)};
}

}  // namespace

TEST_CASE("similarity is the negated euclidean distance") {
  CHECK(similarity(std::vector<float>{0, 0}, std::vector<float>{3, 4}) == -5.0);
  CHECK(similarity(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == -5.0);
  const std::vector<float> e{0.25f, -1.5f, 2.0f};
  CHECK(similarity(e, e) == 0.0);
  CHECK_THROWS_AS(similarity(std::vector<float>{0, 0}, std::vector<float>{0}), ContractError);

  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    auto a = testing::uniform(rng, 32, -1, 1), b = testing::uniform(rng, 32, -1, 1);
    double na = 0, nb = 0;
    for (int k = 0; k < 32; ++k) na += a[k] * a[k], nb += b[k] * b[k];
    for (int k = 0; k < 32; ++k) a[k] /= std::sqrt(na), b[k] /= std::sqrt(nb);
    double d = 0;
    for (int k = 0; k < 32; ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
    REQUIRE(std::abs(similarity(a, b) + std::sqrt(d)) <= 1e-12);
  }
}

TEST_CASE("best match") {
  const std::vector<float> probe{0, 0};
  // similarities -5, -2, -7
  const std::vector<Template> t{tpl("a", {3, 4}, 0), tpl("a", {0, 2}, 1), tpl("a", {7, 0}, 2)};
  const Match m = best_match(probe, t);
  CHECK(m.score == -2.0);
  CHECK(m.index == 1);
  CHECK(m.round_id == 1);

  const std::vector<Template> one{tpl("a", {3, 4}, 3)};
  CHECK(best_match(probe, one).score == similarity(probe, one[0].vector));

  // Tie at -3 goes to the lower round, then to the earlier template.
  const std::vector<Template> tie{tpl("a", {0, 3}, 2), tpl("a", {3, 0}, 1), tpl("a", {-3, 0}, 1)};
  const Match mt = best_match(probe, tie);
  CHECK(mt.score == -3.0);
  CHECK(mt.round_id == 1);
  CHECK(mt.index == 1);

  CHECK_THROWS_AS(best_match(probe, std::vector<Template>{}), ContractError);
}

TEST_CASE("decisions") {
  CHECK(decide(-2, Threshold::fixed(-3), "alice", Scenario::S1).accept);
  CHECK(decide(-3, Threshold::fixed(-3), "alice", Scenario::S1).accept);
  CHECK(!decide(-3.0000001, Threshold::fixed(-3), "alice", Scenario::S2).accept);
  const Threshold per = Threshold::tailored({{"alice", -1.0}, {"bob", -4.0}});
  const Decision d = decide(-2, per, "bob", Scenario::S3, 4);
  CHECK(d.accept);
  CHECK(d.threshold == -4.0);
  CHECK(d.matched_round == 4);
  CHECK(!decide(-2, per, "alice", Scenario::S3).accept);
  CHECK_THROWS_AS(decide(-2, per, "carol", Scenario::S3), IdentityError);
  CHECK_THROWS_AS(per.resolve("carol"), IdentityError);
  for (Scenario s : {Scenario::S1, Scenario::S2, Scenario::S3}) CHECK(parse_scenario(scenario_tag(s)) == s);
  CHECK_THROWS_AS(parse_scenario("s4"), ValidationError);
}

TEST_CASE("calibration") {
  auto labeled = [](const std::string& id, std::vector<double> gen, std::vector<double> imp) {
    std::vector<LabeledScore> out;
    for (double g : gen) out.push_back({id, g, true});
    for (double i : imp) out.push_back({id, i, false});
    return out;
  };
  SUBCASE("perfect separation: gap midpoint") {
    const auto s = labeled("a", {0.9, 0.8, 0.7}, {0.1, 0.2, 0.3});
    const Threshold t = calibrate_thresholds(s, Threshold::Kind::Global);
    CHECK(t.kind == Threshold::Kind::Global);
    CHECK(t.global == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("indistinguishable distributions") {
    const auto s = labeled("a", {1, 2, 3}, {1, 2, 3});
    const Threshold t = calibrate_thresholds(s, Threshold::Kind::Global);
    CHECK(t.global == 2.5);
    std::vector<double> g{1, 2, 3};
    CHECK(oracle::eer(g, g).eer == 0.5);
  }
  SUBCASE("per-user thresholds equal a brute-force sweep per identity") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<LabeledScore> all;
      std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> per;
      for (const std::string id : {"alice", "bob"}) {
        auto gen = testing::uniform(rng, 2 + rng() % 8, -1, 0.5);
        auto imp = testing::uniform(rng, 2 + rng() % 12, -1.5, 0);
        for (auto& v : gen) v = std::round(v * 20) / 20;  // force ties now and then
        auto part = labeled(id, gen, imp);
        all.insert(all.end(), part.begin(), part.end());
        per[id] = {gen, imp};
      }
      const Threshold t = calibrate_thresholds(all, Threshold::Kind::PerUser);
      REQUIRE(t.per_user.size() == 2);
      for (const auto& [id, lists] : per)
        REQUIRE(t.per_user.at(id) == doctest::Approx(oracle::eer(lists.first, lists.second).theta).epsilon(1e-12));
    }
  }
  SUBCASE("missing kinds") {
    CHECK_THROWS_AS(calibrate_thresholds(labeled("a", {1, 2}, {}), Threshold::Kind::Global), CalibrationError);
    auto s = labeled("a", {1, 2}, {0});
    auto b = labeled("b", {1}, {});
    s.insert(s.end(), b.begin(), b.end());
    CHECK_THROWS_AS(calibrate_thresholds(s, Threshold::Kind::PerUser), CalibrationError);
  }
}

TEST_CASE("template store") {
  TemplateStore store;
  store.enroll(tpl("alice", {1, 2, 3}, 0));
  store.enroll(tpl("alice", {1, 2, 4}, 1));
  store.enroll(tpl("bob", {0, 0, 1}, 0, "fusion-a:eye-pupil"));
  CHECK(store.size() == 3);
  CHECK(store.contains("bob"));
  CHECK(!store.contains("carol"));
  CHECK(store.identities() == std::vector<std::string>{"alice", "bob"});
  CHECK(store.templates("alice").size() == 2);
  CHECK_THROWS_AS(store.templates("carol"), IdentityError);
  CHECK_THROWS_AS(store.enroll(tpl("alice", {1, 2}, 2)), ShapeError);
  CHECK_THROWS_AS(store.enroll(tpl("", {1, 2, 3}, 2)), ValidationError);

  testing::TempDir dir("tpl");
  save_templates(store, dir / "t.bin");
  const TemplateStore back = load_templates(dir / "t.bin");
  CHECK(back == store);
  save_templates(back, dir / "u.bin");
  const std::string bytes = testing::slurp(dir / "t.bin");
  CHECK(bytes == testing::slurp(dir / "u.bin"));
  CHECK(bytes.rfind("BIOFUSE-TPL v1\n", 0) == 0);

  std::ofstream(dir / "cut.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_AS(load_templates(dir / "cut.bin"), ParseError);
  std::ofstream(dir / "v2.bin", std::ios::binary) << "BIOFUSE-TPL v2\n" << bytes.substr(15);
  CHECK_THROWS_AS(load_templates(dir / "v2.bin"), VersionError);
  CHECK_THROWS_AS(load_templates(dir / "none.bin"), Error);
}
