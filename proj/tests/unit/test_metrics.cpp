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

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "biofuse/error.hpp"
#include "biofuse/metrics/rates.hpp"
#include "biofuse/metrics/trials.hpp"
#include "oracles.hpp"
#include "unit/common.hpp"

using namespace biofuse;
using namespace biofuse::metrics;

namespace {

const std::vector<double> kGen{0.9, 0.8, 0.4};
const std::vector<double> kImp{0.5, 0.2, 0.1};

// Scores on a coarse grid so ties are common.
std::vector<double> scores(std::mt19937_64& rng, std::size_t n, double lo, double hi, bool coarse) {
  auto v = testing::uniform(rng, n, lo, hi);
  if (coarse)
    for (auto& x : v) x = std::round(x * 10) / 10;
  return v;
}

EmbeddedSet random_set(std::mt19937_64& rng, int subjects, int rounds, int per_round, std::size_t dim) {
  EmbeddedSet set;
  std::normal_distribution<double> n(0, 1);
  for (int s = 0; s < subjects; ++s) {
    set.subjects.push_back("s" + std::to_string(s));
    std::vector<double> centre(dim);
    for (auto& c : centre) c = n(rng);
    for (int r = 0; r < rounds; ++r)
      for (int d = 0; d < per_round; ++d) {
        EmbeddedSample e{s, r, d, {}};
        for (std::size_t k = 0; k < dim; ++k) e.embedding.push_back(static_cast<float>(centre[k] + 0.7 * n(rng)));
        set.samples.push_back(std::move(e));
      }
  }
  return set;
}

}  // namespace

TEST_CASE("eer examples") {
  const EerPoint perfect = compute_eer(std::vector<double>{0.9, 0.8, 0.7}, std::vector<double>{0.1, 0.2, 0.3});
  CHECK(perfect.eer == 0);
  CHECK(perfect.threshold == doctest::Approx(0.5).epsilon(1e-15));

  const std::vector<double> same{0.1, 0.3, 0.5, 0.7};
  CHECK(compute_eer(same, same).eer == 0.5);

  const EerPoint third = compute_eer(kGen, kImp);
  CHECK(third.eer == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(third.threshold == doctest::Approx(0.45).epsilon(1e-15));

  CHECK_THROWS_AS(compute_eer(std::vector<double>{}, kImp), EvalError);
  CHECK_THROWS_AS(compute_eer(kGen, std::vector<double>{}), EvalError);
}

TEST_CASE("frr at far examples") {
  const FrrAtFar z = frr_at_far(kGen, kImp, 0.0);
  CHECK(z.threshold > 0.5);
  CHECK(z.far == 0);
  CHECK(z.frr == doctest::Approx(1.0 / 3).epsilon(1e-15));

  const std::vector<double> g{0.9, 0.8, 0.7}, i{0.1, 0.2, 0.3};
  for (double t : {0.01, 0.001, 0.0}) CHECK(frr_at_far(g, i, t).frr == 0);

  const Rates r = rates_at(kGen, kImp, 0.45);
  CHECK(r.far == doctest::Approx(1.0 / 3));
  CHECK(r.frr == doctest::Approx(1.0 / 3));
  CHECK_THROWS_AS(frr_at_far(std::vector<double>{}, kImp, 0.0), EvalError);
}

TEST_CASE("property: eer and frr@far match the exhaustive sweep") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const bool coarse = trial % 2 == 0;
    const std::size_t ng = 1 + rng() % 200, ni = 1 + rng() % 800;
    const double shift = std::uniform_real_distribution<double>(-0.5, 1.0)(rng);
    const auto g = scores(rng, ng, shift - 1, shift + 1, coarse);
    const auto i = scores(rng, ni, -1, 1, coarse);
    const EerPoint e = compute_eer(g, i);
    const oracle::Eer o = oracle::eer(g, i);
    REQUIRE(std::abs(e.eer - o.eer) <= 1e-9);
    REQUIRE(std::abs(e.threshold - o.theta) <= 1e-9);
    REQUIRE(e.eer >= 0);
    REQUIRE(e.eer <= 1);
    double prev = -1;
    for (double t : {0.01, 0.001, 0.0}) {
      const FrrAtFar f = frr_at_far(g, i, t);
      const oracle::FrrAt of = oracle::frr_at_far(g, i, t);
      REQUIRE(f.frr == of.frr);
      REQUIRE(f.far == of.far);
      REQUIRE(f.threshold == of.theta);
      REQUIRE(f.far <= t);
      REQUIRE(f.frr >= prev);
      prev = f.frr;
    }
    REQUIRE(frr_at_far(g, i, 0.0).threshold > *std::max_element(i.begin(), i.end()));
  }
}

TEST_CASE("property: sweep rates are monotone in the threshold") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = scores(rng, 1 + rng() % 50, -1, 1, true);
    const auto i = scores(rng, 1 + rng() % 50, -1, 1, false);
    double far = 2, frr = -1;
    for (const auto& p : oracle::sweep(g, i)) {
      const Rates r = rates_at(g, i, p.theta);
      REQUIRE(r.far == p.far);
      REQUIRE(r.frr == p.frr);
      REQUIRE(r.far <= far);
      REQUIRE(r.frr >= frr);
      far = r.far, frr = r.frr;
    }
  }
}

TEST_CASE("s1 trial enumeration") {
  std::mt19937_64 rng(1);
  const EmbeddedSet set = random_set(rng, 2, 2, 2, 4);
  const TrialSet t = build_trials(set, Scenario::S1);
  CHECK(t.n_genuine() == 8);
  // Each verification sample (8) against the 4 cross-round samples of the other subject.
  CHECK(t.n_impostor() == 8 * 2);
  CHECK(audit_round_exclusion(t, set) == 0);
  for (const Trial& tr : t.trials) {
    CHECK(tr.enroll_sample >= 0);
    const auto& e = set.samples[static_cast<std::size_t>(tr.enroll_sample)];
    const auto& v = set.samples[tr.verif_sample];
    CHECK(e.round != v.round);
    CHECK(e.subject == tr.claimed);
    CHECK(tr.genuine == (tr.claimed == tr.verif_subject));
    CHECK(tr.score == doctest::Approx(similarity(v.embedding, e.embedding)).epsilon(1e-12));
  }
}

TEST_CASE("s2 best match dominates every s1 genuine score of the same sample") {
  std::mt19937_64 rng(2);
  const EmbeddedSet set = random_set(rng, 4, 3, 3, 6);
  const TrialSet s1 = build_trials(set, Scenario::S1);
  const TrialSet s2 = build_trials(set, Scenario::S2);
  CHECK(audit_round_exclusion(s2, set) == 0);
  std::map<std::size_t, double> best;
  for (const Trial& t : s2.trials)
    if (t.genuine) best[t.verif_sample] = t.score;
  CHECK(best.size() == set.samples.size());
  for (const Trial& t : s1.trials)
    if (t.genuine) {
      CHECK(best.at(t.verif_sample) >= t.score);
      CHECK(best.at(static_cast<std::size_t>(t.enroll_sample)) >= t.score);
    }
  for (const Trial& t : s2.trials) CHECK((t.enroll_rounds >> t.verif_round & 1) == 0);
}

TEST_CASE("round exclusion audit flags a doctored trial") {
  std::mt19937_64 rng(3);
  const EmbeddedSet set = random_set(rng, 3, 2, 2, 4);
  TrialSet t = build_trials(set, Scenario::S2);
  REQUIRE(audit_round_exclusion(t, set) == 0);
  t.trials[0].enroll_rounds |= std::uint64_t{1} << t.trials[0].verif_round;
  CHECK(audit_round_exclusion(t, set) == 1);

  TrialSet s1 = build_trials(set, Scenario::S1);
  for (const auto& s : set.samples)
    if (s.subject == s1.trials[0].claimed && s.round == s1.trials[0].verif_round) {
      s1.trials[0].enroll_sample = &s - set.samples.data();
      break;
    }
  CHECK(audit_round_exclusion(s1, set) == 1);
}

TEST_CASE("single-round subjects are excluded") {
  std::mt19937_64 rng(4);
  EmbeddedSet set = random_set(rng, 3, 2, 2, 4);
  std::erase_if(set.samples, [](const EmbeddedSample& s) { return s.subject == 1 && s.round == 1; });
  const TrialSet t = build_trials(set, Scenario::S2);
  CHECK(t.excluded_subjects == std::vector<std::string>{"s1"});
  for (const Trial& tr : t.trials) {
    CHECK(tr.claimed != 1);
    CHECK(tr.verif_subject != 1);
  }
}

TEST_CASE("per-subject eer equals per-identity sweeps") {
  std::mt19937_64 rng(5);
  const EmbeddedSet set = random_set(rng, 3, 3, 2, 4);
  const TrialSet t = build_trials(set, Scenario::S2);
  const PerSubjectEer p = per_subject_eer(t);
  CHECK(p.eer.size() == 3);
  CHECK(p.skipped.empty());
  double mean = 0;
  for (int s = 0; s < 3; ++s) {
    const auto o = oracle::eer(t.genuine_for(s), t.impostor_for(s));
    const EerPoint& e = p.eer.at(set.subjects[s]);
    CHECK(e.eer == doctest::Approx(o.eer).epsilon(1e-12));
    CHECK(e.threshold == doctest::Approx(o.theta).epsilon(1e-12));
    mean += e.eer / 3;
  }
  CHECK(p.mean == doctest::Approx(mean).epsilon(1e-12));

  // Restricting the set to one claimed identity reproduces compute_eer.
  TrialSet only = t;
  std::erase_if(only.trials, [](const Trial& tr) { return tr.claimed != 0; });
  CHECK(compute_eer(only).eer == p.eer.at("s0").eer);

  // Identical score sets for every subject give identical EERs.
  TrialSet same = t;
  for (Trial& tr : same.trials) tr.score = tr.genuine ? 0.1 * (tr.verif_sample % 3) : 0.1 * (tr.verif_sample % 2);
  const PerSubjectEer q = per_subject_eer(same);
  std::set<double> distinct;
  for (const auto& [id, e] : q.eer) distinct.insert(e.eer);
  CHECK(distinct.size() == 1);
  CHECK(q.variance == doctest::Approx(0).epsilon(1e-15));

  TrialSet missing = t;
  std::erase_if(missing.trials, [](const Trial& tr) { return tr.claimed == 2 && !tr.genuine; });
  const PerSubjectEer m = per_subject_eer(missing);
  CHECK(m.skipped == std::vector<std::string>{"s2"});
  CHECK(m.eer.size() == 2);
}

TEST_CASE("fold planning") {
  std::vector<std::string> subjects;
  for (int i = 0; i < 30; ++i) subjects.push_back("subject" + std::to_string(i));
  const FoldPlan p = plan_folds(subjects, 6, 42);
  CHECK(p.k == 6);
  REQUIRE(p.train.size() == 6);
  for (int f = 0; f < 6; ++f) {
    CHECK(p.train[f].size() == 25);
    CHECK(p.test[f].size() == 5);
  }
  CHECK(audit_fold_plan(p, subjects) == 0);
  const FoldPlan again = plan_folds(subjects, 6, 42);
  CHECK(again.test == p.test);
  CHECK(again.train == p.train);
  CHECK(plan_folds(subjects, 6, 43).test != p.test);

  const FoldPlan loo = plan_folds(subjects, 30, 1);
  for (const auto& t : loo.test) CHECK(t.size() == 1);
  CHECK(audit_fold_plan(loo, subjects) == 0);

  const FoldPlan uneven = plan_folds(subjects, 7, 1);
  std::size_t lo = 99, hi = 0;
  for (const auto& t : uneven.test) lo = std::min(lo, t.size()), hi = std::max(hi, t.size());
  CHECK(hi - lo <= 1);
  CHECK(audit_fold_plan(uneven, subjects) == 0);

  FoldPlan bad = p;
  bad.train[0].push_back(bad.test[0][0]);
  CHECK(audit_fold_plan(bad, subjects) >= 1);

  CHECK_THROWS_AS(plan_folds(subjects, 31, 1), ValidationError);
  CHECK_THROWS_AS(plan_folds(subjects, 1, 1), ValidationError);
}
