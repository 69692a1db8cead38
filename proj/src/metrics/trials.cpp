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
#include <bit>
#include <random>
#include <set>

#include "biofuse/error.hpp"
#include "biofuse/metrics/trials.hpp"
#include "biofuse/simd/kernels.hpp"

namespace biofuse::metrics {
namespace {

std::uint64_t round_bit(int r) {
  if (r < 0 || r >= 64) throw ValidationError("trials: round ids must lie in [0, 64)");
  return std::uint64_t{1} << r;
}

double sim(const std::vector<float>& a, const std::vector<float>& b) { return similarity(a, b); }

}  // namespace

std::vector<double> TrialSet::genuine() const {
  std::vector<double> out;
  for (const auto& t : trials)
    if (t.genuine) out.push_back(t.score);
  return out;
}

std::vector<double> TrialSet::impostor() const {
  std::vector<double> out;
  for (const auto& t : trials)
    if (!t.genuine) out.push_back(t.score);
  return out;
}

std::size_t TrialSet::n_genuine() const {
  return static_cast<std::size_t>(std::count_if(trials.begin(), trials.end(), [](const Trial& t) { return t.genuine; }));
}

std::size_t TrialSet::n_impostor() const { return trials.size() - n_genuine(); }

std::vector<double> TrialSet::genuine_for(int claimed) const {
  std::vector<double> out;
  for (const auto& t : trials)
    if (t.genuine && t.claimed == claimed) out.push_back(t.score);
  return out;
}

std::vector<double> TrialSet::impostor_for(int claimed) const {
  std::vector<double> out;
  for (const auto& t : trials)
    if (!t.genuine && t.claimed == claimed) out.push_back(t.score);
  return out;
}

TrialSet build_trials(const EmbeddedSet& set, Scenario scenario) {
  TrialSet ts;
  ts.scenario = scenario;
  ts.subjects = set.subjects;
  const int n_subj = static_cast<int>(set.subjects.size());

  std::vector<std::vector<std::size_t>> by_subject(n_subj);
  std::vector<std::uint64_t> rounds_of(n_subj, 0);
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const auto& s = set.samples[i];
    if (s.subject < 0 || s.subject >= n_subj) throw ValidationError("build_trials: subject index out of range");
    by_subject[s.subject].push_back(i);
    rounds_of[s.subject] |= round_bit(s.round);
  }
  std::vector<bool> usable(n_subj, false);
  for (int s = 0; s < n_subj; ++s) {
    usable[s] = std::popcount(rounds_of[s]) >= 2;
    if (!usable[s]) ts.excluded_subjects.push_back(set.subjects[s]);
  }

  for (int claimed = 0; claimed < n_subj; ++claimed) {
    if (!usable[claimed]) continue;
    const auto& own = by_subject[claimed];
    if (scenario == Scenario::S1) {
      for (std::size_t a = 0; a < own.size(); ++a)
        for (std::size_t b = a + 1; b < own.size(); ++b) {
          const auto& e = set.samples[own[a]];
          const auto& v = set.samples[own[b]];
          if (e.round == v.round) continue;
          ts.trials.push_back({sim(e.embedding, v.embedding), true, claimed, claimed, v.round, own[b],
                               static_cast<std::int64_t>(own[a]), round_bit(e.round)});
        }
      for (int other = 0; other < n_subj; ++other) {
        if (other == claimed || !usable[other]) continue;
        for (std::size_t vi : by_subject[other]) {
          const auto& v = set.samples[vi];
          for (std::size_t ei : own) {
            const auto& e = set.samples[ei];
            if (e.round == v.round) continue;
            ts.trials.push_back({sim(e.embedding, v.embedding), false, claimed, other, v.round, vi,
                                 static_cast<std::int64_t>(ei), round_bit(e.round)});
          }
        }
      }
    } else {
      for (int verifier = 0; verifier < n_subj; ++verifier) {
        if (!usable[verifier]) continue;
        for (std::size_t vi : by_subject[verifier]) {
          const auto& v = set.samples[vi];
          double best = 0;
          int best_round = 0;
          bool found = false;
          std::uint64_t mask = 0;
          // Same tie-break as best_match: lower round, then earlier sample.
          for (std::size_t ei : own) {
            const auto& e = set.samples[ei];
            if (e.round == v.round) continue;
            mask |= round_bit(e.round);
            const double s = sim(e.embedding, v.embedding);
            if (!found || s > best || (s == best && e.round < best_round)) {
              best = s;
              best_round = e.round;
              found = true;
            }
          }
          if (!found) continue;
          ts.trials.push_back({best, verifier == claimed, claimed, verifier, v.round, vi, -1, mask});
        }
      }
    }
  }
  return ts;
}

std::vector<fusion::ScorePair> score_pairs(const TrialSet& eye, const TrialSet& brain) {
  if (eye.trials.size() != brain.trials.size() || eye.scenario != brain.scenario)
    throw ContractError("fuse_trials: eye and brain trial sets do not align");
  std::vector<fusion::ScorePair> out;
  out.reserve(eye.trials.size());
  for (std::size_t i = 0; i < eye.trials.size(); ++i) {
    const Trial& e = eye.trials[i];
    const Trial& b = brain.trials[i];
    if (e.genuine != b.genuine || e.claimed != b.claimed || e.verif_sample != b.verif_sample ||
        e.enroll_sample != b.enroll_sample || e.verif_round != b.verif_round)
      throw ContractError("fuse_trials: trial " + std::to_string(i) + " refers to different events");
    out.push_back({e.score, b.score});
  }
  return out;
}

TrialSet fuse_trials(const TrialSet& eye, const TrialSet& brain, fusion::Rule rule,
                     const std::optional<fusion::ScoreNormalizer>& normalizer) {
  const auto pairs = score_pairs(eye, brain);
  TrialSet out = eye;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    Trial& t = out.trials[i];
    t.enroll_rounds = eye.trials[i].enroll_rounds | brain.trials[i].enroll_rounds;
    t.score = normalizer ? fusion::fuse(normalizer->normalize(pairs[i]), rule) : fusion::fuse_raw(pairs[i], rule);
  }
  return out;
}

EerPoint compute_eer(const TrialSet& trials) { return compute_eer(trials.genuine(), trials.impostor()); }

FrrAtFar frr_at_far(const TrialSet& trials, double far_target) {
  return frr_at_far(trials.genuine(), trials.impostor(), far_target);
}

PerSubjectEer per_subject_eer(const TrialSet& trials) {
  PerSubjectEer out;
  for (int s = 0; s < static_cast<int>(trials.subjects.size()); ++s) {
    const auto gen = trials.genuine_for(s);
    const auto imp = trials.impostor_for(s);
    if (gen.empty() || imp.empty()) {
      out.skipped.push_back(trials.subjects[s]);
      continue;
    }
    out.eer[trials.subjects[s]] = compute_eer(gen, imp);
  }
  if (!out.eer.empty()) {
    double sum = 0;
    for (const auto& [_, p] : out.eer) sum += p.eer;
    out.mean = sum / static_cast<double>(out.eer.size());
    double ss = 0;
    for (const auto& [_, p] : out.eer) ss += (p.eer - out.mean) * (p.eer - out.mean);
    out.variance = ss / static_cast<double>(out.eer.size());
  }
  return out;
}

std::size_t audit_round_exclusion(const TrialSet& trials, const EmbeddedSet& set) {
  std::size_t bad = 0;
  for (const auto& t : trials.trials) {
    bool ok = (t.enroll_rounds & round_bit(t.verif_round)) == 0;
    ok = ok && set.samples.at(t.verif_sample).round == t.verif_round;
    ok = ok && set.samples.at(t.verif_sample).subject == t.verif_subject;
    ok = ok && t.genuine == (t.claimed == t.verif_subject);
    if (t.enroll_sample >= 0) {
      const auto& e = set.samples.at(static_cast<std::size_t>(t.enroll_sample));
      ok = ok && e.round != t.verif_round && e.subject == t.claimed;
    }
    if (!ok) ++bad;
  }
  return bad;
}

FoldPlan plan_folds(std::vector<std::string> subjects, int k, std::uint64_t seed) {
  const int n = static_cast<int>(subjects.size());
  if (k < 2) throw ValidationError("plan_folds: k must be >= 2");
  if (k > n) throw ValidationError("plan_folds: k = " + std::to_string(k) + " exceeds the " + std::to_string(n) +
                                   " available subjects");
  std::sort(subjects.begin(), subjects.end());
  std::mt19937_64 rng(seed);
  std::shuffle(subjects.begin(), subjects.end(), rng);
  FoldPlan plan;
  plan.k = k;
  int begin = 0;
  for (int f = 0; f < k; ++f) {
    const int size = n / k + (f < n % k ? 1 : 0);
    std::vector<std::string> test(subjects.begin() + begin, subjects.begin() + begin + size);
    std::vector<std::string> train;
    for (int i = 0; i < n; ++i)
      if (i < begin || i >= begin + size) train.push_back(subjects[i]);
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    plan.test.push_back(std::move(test));
    plan.train.push_back(std::move(train));
    begin += size;
  }
  return plan;
}

std::size_t audit_fold_plan(const FoldPlan& plan, const std::vector<std::string>& subjects) {
  std::size_t bad = 0;
  std::multiset<std::string> all_test;
  for (int f = 0; f < plan.k; ++f) {
    const std::set<std::string> train(plan.train[f].begin(), plan.train[f].end());
    for (const auto& s : plan.test[f]) {
      if (train.count(s)) ++bad;
      all_test.insert(s);
    }
  }
  const std::set<std::string> expected(subjects.begin(), subjects.end());
  for (const auto& s : expected)
    if (all_test.count(s) != 1) ++bad;
  for (const auto& s : all_test)
    if (!expected.count(s)) ++bad;
  return bad;
}

}  // namespace biofuse::metrics
