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
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "biofuse/error.hpp"
#include "biofuse/metrics/experiment.hpp"
#include "biofuse/simd/kernels.hpp"
#include "biofuse/tnn/model.hpp"

namespace biofuse::metrics {
namespace {

using json = nlohmann::ordered_json;

constexpr double kFarTargets[] = {0.01, 0.001, 0.0};
constexpr Scenario kScenarios[] = {Scenario::S1, Scenario::S2, Scenario::S3};

using Key = std::tuple<std::string, int, int>;
Key key_of(const Sample& s) { return {s.subject_id, s.round_id, s.dot_index}; }

}  // namespace

void align_samples(std::span<std::vector<Sample>* const> sets) {
  if (sets.size() < 2) return;
  std::set<Key> common;
  for (const auto& s : *sets[0]) common.insert(key_of(s));
  for (std::size_t m = 1; m < sets.size(); ++m) {
    std::set<Key> here;
    for (const auto& s : *sets[m])
      if (common.count(key_of(s))) here.insert(key_of(s));
    common = std::move(here);
  }
  for (auto* d : sets) std::erase_if(*d, [&](const Sample& s) { return !common.count(key_of(s)); });
  for (std::size_t i = 0; i < sets[0]->size(); ++i)
    for (std::size_t m = 1; m < sets.size(); ++m)
      if (key_of((*sets[0])[i]) != key_of((*sets[m])[i]))
        throw EvalError("modalities disagree on event order");
}

namespace {

std::vector<Sample> select(const std::vector<Sample>& all, const std::set<std::string>& subjects) {
  std::vector<Sample> out;
  for (const auto& s : all)
    if (subjects.count(s.subject_id)) out.push_back(s);
  return out;
}

int index_of(const std::vector<std::string>& list, const std::string& id) {
  const auto it = std::find(list.begin(), list.end(), id);
  if (it == list.end()) throw EvalError("experiment: subject '" + id + "' missing from fold list");
  return static_cast<int>(it - list.begin());
}

struct FoldData {
  std::vector<std::vector<Sample>> train;  // [modality][sample]
  std::vector<std::vector<Sample>> test;
  std::vector<Standardizer> standardizers;
};

// Which modalities feed which model, as indices into the modality list.
struct ModelPlan {
  tnn::ArchSpec arch;
  std::vector<std::size_t> inputs;
};

EmbeddedSet embed_all(const tnn::EmbeddingModel& model, const std::vector<std::vector<Sample>>& data,
                      const std::vector<std::size_t>& inputs, const std::vector<std::string>& subjects) {
  tnn::Embedder embedder(model);
  EmbeddedSet set;
  set.subjects = subjects;
  const std::size_t n = data[inputs[0]].size();
  std::vector<const Sample*> in(inputs.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < inputs.size(); ++b) in[b] = &data[inputs[b]][i];
    const Sample& s = *in[0];
    set.samples.push_back({index_of(subjects, s.subject_id), s.round_id, s.dot_index, embedder(in)});
  }
  return set;
}

ScenarioMetrics summarize(const TrialSet& trials, Scenario scenario) {
  ScenarioMetrics m;
  m.scenario = scenario;
  m.n_genuine = trials.n_genuine();
  m.n_impostor = trials.n_impostor();
  m.excluded_subjects = trials.excluded_subjects;
  if (m.n_genuine == 0 || m.n_impostor == 0)
    throw EvalError("experiment: scenario " + std::string(scenario_tag(scenario)) +
                    " produced no genuine or no impostor trials");
  const auto gen = trials.genuine();
  const auto imp = trials.impostor();
  const EerPoint pooled = compute_eer(gen, imp);
  m.pooled_eer = pooled.eer;
  m.per_subject = per_subject_eer(trials);

  if (scenario != Scenario::S3) {
    m.eer = pooled.eer;
    m.eer_threshold = pooled.threshold;
    for (double target : kFarTargets) m.frr_at_far.push_back(frr_at_far(gen, imp, target));
    return m;
  }

  if (m.per_subject.eer.empty()) throw EvalError("experiment: no subject supports a tailored threshold");
  m.eer = m.per_subject.mean;
  std::vector<LabeledScore> labeled;
  for (const auto& t : trials.trials) {
    const std::string& id = trials.subjects[t.claimed];
    if (m.per_subject.eer.count(id)) labeled.push_back({id, t.score, t.genuine});
  }
  const Threshold tailored = calibrate_thresholds(labeled, Threshold::Kind::PerUser);
  m.per_user_thresholds = tailored.per_user;

  std::size_t fa = 0, fr = 0, n_imp = 0, n_gen = 0;
  for (const auto& ls : labeled) {
    const bool accept = decide(ls.score, tailored, ls.identity, Scenario::S3).accept;
    if (ls.genuine) {
      ++n_gen;
      fr += accept ? 0 : 1;
    } else {
      ++n_imp;
      fa += accept ? 1 : 0;
    }
  }
  m.tailored_rates = {static_cast<double>(fa) / static_cast<double>(n_imp),
                      static_cast<double>(fr) / static_cast<double>(n_gen)};

  for (double target : kFarTargets) {
    FrrAtFar mean{target, 0, 0, 0};
    for (int s = 0; s < static_cast<int>(trials.subjects.size()); ++s) {
      if (!m.per_subject.eer.count(trials.subjects[s])) continue;
      const FrrAtFar r = frr_at_far(trials.genuine_for(s), trials.impostor_for(s), target);
      mean.far += r.far;
      mean.frr += r.frr;
    }
    const auto n = static_cast<double>(m.per_subject.eer.size());
    mean.far /= n;
    mean.frr /= n;
    mean.threshold = std::numeric_limits<double>::quiet_NaN();
    m.frr_at_far.push_back(mean);
  }
  return m;
}

// Concatenates fold trial sets; subject indices are remapped onto a merged
// subject list. Sample references are dropped.
TrialSet merge(const std::vector<const TrialSet*>& parts) {
  TrialSet out;
  out.scenario = parts.at(0)->scenario;
  for (const TrialSet* p : parts) {
    std::vector<int> remap;
    for (const auto& id : p->subjects) {
      auto it = std::find(out.subjects.begin(), out.subjects.end(), id);
      if (it == out.subjects.end()) {
        out.subjects.push_back(id);
        remap.push_back(static_cast<int>(out.subjects.size() - 1));
      } else {
        remap.push_back(static_cast<int>(it - out.subjects.begin()));
      }
    }
    for (Trial t : p->trials) {
      t.claimed = remap[t.claimed];
      t.verif_subject = remap[t.verif_subject];
      t.verif_sample = 0;
      t.enroll_sample = -1;
      out.trials.push_back(t);
    }
    out.excluded_subjects.insert(out.excluded_subjects.end(), p->excluded_subjects.begin(),
                                 p->excluded_subjects.end());
  }
  return out;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json scenario_json(const ScenarioMetrics& m, bool pooled) {
  json j;
  j["scenario"] = std::string(scenario_tag(m.scenario));
  j["eer"] = num(m.eer);
  if (m.scenario != Scenario::S3) j["eer_threshold"] = num(m.eer_threshold);
  j["pooled_eer"] = num(m.pooled_eer);
  if (pooled) j["fold_mean_eer"] = num(m.fold_mean_eer);
  json frr = json::array();
  for (const auto& r : m.frr_at_far)
    frr.push_back({{"far_target", r.far_target}, {"far", num(r.far)}, {"frr", num(r.frr)}, {"threshold", num(r.threshold)}});
  j["frr_at_far"] = frr;
  json ps = json::object();
  for (const auto& [id, p] : m.per_subject.eer) ps[id] = {{"eer", num(p.eer)}, {"threshold", num(p.threshold)}};
  j["per_subject_eer"] = ps;
  j["per_subject_mean"] = num(m.per_subject.mean);
  j["per_subject_variance"] = num(m.per_subject.variance);
  j["per_subject_skipped"] = m.per_subject.skipped;
  if (m.scenario == Scenario::S3) {
    json th = json::object();
    for (const auto& [id, t] : m.per_user_thresholds) th[id] = num(t);
    j["per_user_thresholds"] = th;
    j["tailored_far"] = num(m.tailored_rates.far);
    j["tailored_frr"] = num(m.tailored_rates.frr);
  }
  j["n_genuine"] = m.n_genuine;
  j["n_impostor"] = m.n_impostor;
  if (!pooled) j["round_violations"] = m.round_violations;
  j["excluded_subjects"] = m.excluded_subjects;
  return j;
}

json arm_json(const ArmReport& a, bool pooled) {
  json j;
  j["name"] = a.name;
  json sc = json::array();
  for (const auto& m : a.scenarios) sc.push_back(scenario_json(m, pooled));
  j["scenarios"] = sc;
  return j;
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::string_view model_kind_tag(ModelKind k) {
  switch (k) {
    case ModelKind::Brain: return "brain";
    case ModelKind::Eye: return "eye";
    case ModelKind::EyePupil: return "eye-pupil";
    case ModelKind::FusionA: return "fusion-a";
    case ModelKind::FusionB: return "fusion-b";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view tag) {
  for (ModelKind k : {ModelKind::Brain, ModelKind::Eye, ModelKind::EyePupil, ModelKind::FusionA, ModelKind::FusionB})
    if (model_kind_tag(k) == tag) return k;
  throw ValidationError("unknown modality '" + std::string(tag) + "'");
}

void ExperimentConfig::validate() const {
  if (folds < 2) throw ValidationError("experiment: folds must be >= 2");
  if (fusion && model != ModelKind::Eye && model != ModelKind::EyePupil)
    throw ValidationError("experiment: score fusion pairs brain with --modality eye or eye-pupil");
  if (raw_score_fusion && !fusion) throw ValidationError("experiment: raw score fusion requires a fusion rule");
  if (!is_eye(fusion_eye)) throw ValidationError("experiment: fusion_eye must be an eye modality");
  nan_policy.validate();
  train.validate();
}

const ScenarioMetrics& ArmReport::at(Scenario s) const {
  for (const auto& m : scenarios)
    if (m.scenario == s) return m;
  throw EvalError("arm " + name + ": scenario " + std::string(scenario_tag(s)) + " missing");
}

const ArmReport& EvalReport::arm(const std::string& name) const {
  for (const auto& a : pooled)
    if (a.name == name) return a;
  throw EvalError("report has no arm '" + name + "'");
}

std::string EvalReport::to_json() const {
  json j;
  j["format"] = "BIOFUSE-REPORT v1";
  json c;
  c["modality"] = std::string(model_kind_tag(config.model));
  c["fusion"] = config.fusion ? std::string(fusion::rule_tag(*config.fusion)) : "none";
  c["raw_score_fusion"] = config.raw_score_fusion;
  c["fusion_eye"] = std::string(modality_tag(config.fusion_eye));
  c["folds"] = config.folds;
  c["fold_seed"] = config.fold_seed;
  c["nan_policy"] = {{"max_nan_fraction", config.nan_policy.max_nan_fraction}};
  c["train"] = {{"margin", config.train.margin},
                {"batch_size", config.train.batch_size},
                {"epochs", config.train.epochs},
                {"learning_rate", config.train.learning_rate},
                {"optimizer", std::string(tnn::optimizer_name(config.train.optimizer))},
                {"seed", config.train.seed},
                {"deterministic", config.train.deterministic}};
  c["kernels"] = kernels;
  j["config"] = c;
  json pre = json::array();
  for (const auto& p : preprocess) {
    const RoundCounts t = p.total();
    pre.push_back({{"modality", std::string(modality_tag(p.modality))},
                   {"extracted", t.extracted},
                   {"rejected", t.rejected},
                   {"skipped", t.skipped}});
  }
  j["preprocess"] = pre;
  j["fold_plan_violations"] = fold_plan_violations;
  json folds_j = json::array();
  for (const auto& f : folds) {
    json fj;
    fj["fold"] = f.fold;
    fj["train_subjects"] = f.train_subjects;
    fj["test_subjects"] = f.test_subjects;
    json models = json::array();
    for (const auto& m : f.models) {
      json lj = json::array();
      for (double l : m.epoch_loss) lj.push_back(num(l));
      models.push_back({{"tag", m.tag}, {"epoch_loss", lj}});
    }
    fj["models"] = models;
    fj["subject_violations"] = f.subject_violations;
    json arms = json::array();
    for (const auto& a : f.arms) arms.push_back(arm_json(a, false));
    fj["arms"] = arms;
    folds_j.push_back(fj);
  }
  j["folds"] = folds_j;
  json pooled_j = json::array();
  for (const auto& a : pooled) pooled_j.push_back(arm_json(a, true));
  j["pooled"] = pooled_j;
  return j.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
  const std::string cfg = std::string(model_kind_tag(config.model)) + "/" +
                          (config.fusion ? std::string(fusion::rule_tag(*config.fusion)) : "none");
  std::ostringstream os;
  os << "config\tfold\tarm\tscenario\tmetric\tvalue\n";
  auto emit = [&](const std::string& fold, const ArmReport& a) {
    for (const auto& m : a.scenarios) {
      const std::string pre = cfg + "\t" + fold + "\t" + a.name + "\t" + std::string(scenario_tag(m.scenario)) + "\t";
      os << pre << "eer\t" << fmt(m.eer) << '\n';
      os << pre << "pooled_eer\t" << fmt(m.pooled_eer) << '\n';
      for (const auto& r : m.frr_at_far) os << pre << "frr@far=" << fmt(r.far_target) << '\t' << fmt(r.frr) << '\n';
      for (const auto& [id, p] : m.per_subject.eer) os << pre << "eer[" << id << "]\t" << fmt(p.eer) << '\n';
      os << pre << "n_genuine\t" << m.n_genuine << '\n';
      os << pre << "n_impostor\t" << m.n_impostor << '\n';
    }
  };
  for (const auto& f : folds)
    for (const auto& a : f.arms) emit(std::to_string(f.fold), a);
  for (const auto& a : pooled) emit("pooled", a);
  return os.str();
}

ExperimentResult run_experiment(const std::vector<Recording>& corpus, const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  EvalReport& report = result.report;
  report.config = cfg;
  report.kernels = std::string(simd::isa_name(simd::active().isa));

  // Modalities and models.
  std::vector<Modality> mods;
  std::vector<ModelPlan> plans;
  const bool score_fusion = cfg.fusion.has_value();
  switch (cfg.model) {
    case ModelKind::Brain: mods = {Modality::Brain}; break;
    case ModelKind::Eye: mods = {Modality::EyeNoPupil}; break;
    case ModelKind::EyePupil: mods = {Modality::EyeWithPupil}; break;
    case ModelKind::FusionA:
    case ModelKind::FusionB: mods = {Modality::Brain, cfg.fusion_eye}; break;
  }
  if (score_fusion) mods.insert(mods.begin(), Modality::Brain);
  if (cfg.model == ModelKind::FusionA) plans.push_back({tnn::ArchSpec::fusion_a(cfg.fusion_eye), {0, 1}});
  else if (cfg.model == ModelKind::FusionB) plans.push_back({tnn::ArchSpec::fusion_b(cfg.fusion_eye), {0, 1}});
  else
    for (std::size_t m = 0; m < mods.size(); ++m) plans.push_back({tnn::ArchSpec::single(mods[m]), {m}});

  std::vector<Dataset> datasets;
  for (Modality m : mods) {
    datasets.push_back(build_dataset(corpus, m, cfg.nan_policy));
    report.preprocess.push_back(datasets.back().report);
  }
  {
    std::vector<std::vector<Sample>*> sets;
    for (auto& d : datasets) sets.push_back(&d.samples);
    align_samples(sets);
  }

  std::vector<std::string> subjects;
  for (const auto& s : datasets[0].samples)
    if (subjects.empty() || subjects.back() != s.subject_id) subjects.push_back(s.subject_id);
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  const FoldPlan plan = plan_folds(subjects, cfg.folds, cfg.fold_seed);
  report.fold_plan_violations = audit_fold_plan(plan, subjects);

  // [arm][scenario][fold] trial sets, kept for pooling.
  std::vector<std::string> arm_names;
  std::vector<std::vector<std::vector<TrialSet>>> kept;

  for (int f = 0; f < plan.k; ++f) {
    try {
      FoldReport fr;
      fr.fold = f;
      fr.train_subjects = plan.train[f];
      fr.test_subjects = plan.test[f];
      const std::string scope = "fold-" + std::to_string(f);
      const std::set<std::string> train_ids(plan.train[f].begin(), plan.train[f].end());
      const std::set<std::string> test_ids(plan.test[f].begin(), plan.test[f].end());

      FoldData fd;
      for (std::size_t m = 0; m < mods.size(); ++m) {
        auto train = select(datasets[m].samples, train_ids);
        auto test = select(datasets[m].samples, test_ids);
        const Standardizer st = fit_standardizer(train, mods[m], scope);
        st.apply_in_place(train);
        st.apply_in_place(test);
        fd.train.push_back(std::move(train));
        fd.test.push_back(std::move(test));
        fd.standardizers.push_back(st);
      }
      for (const auto& per_mod : fd.test)
        for (const auto& s : per_mod)
          if (s.transform_scope != scope || train_ids.count(s.subject_id)) ++fr.subject_violations;

      std::vector<tnn::EmbeddingModel> models;
      for (std::size_t p = 0; p < plans.size(); ++p) {
        const ModelPlan& mp = plans[p];
        std::vector<tnn::Example> examples;
        std::vector<const Sample*> in(mp.inputs.size());
        for (std::size_t i = 0; i < fd.train[mp.inputs[0]].size(); ++i) {
          for (std::size_t b = 0; b < mp.inputs.size(); ++b) in[b] = &fd.train[mp.inputs[b]][i];
          examples.push_back(tnn::make_example(index_of(plan.train[f], in[0]->subject_id), in));
        }
        tnn::TrainConfig tc = cfg.train;
        tc.seed = cfg.train.seed + 7919ull * static_cast<std::uint64_t>(f) + 104729ull * p;
        auto trained = tnn::train(examples, mp.arch, tc, scope);
        for (std::size_t b : mp.inputs) trained.model.standardizers.push_back(fd.standardizers[b]);
        fr.models.push_back({mp.arch.tag(), trained.epoch_loss});
        models.push_back(std::move(trained.model));
      }

      std::vector<EmbeddedSet> test_sets;
      for (std::size_t p = 0; p < plans.size(); ++p)
        test_sets.push_back(embed_all(models[p], fd.test, plans[p].inputs, plan.test[f]));

      // Arms for this fold: [arm][scenario]
      std::vector<std::pair<std::string, std::vector<TrialSet>>> arms;
      auto scenario_sets = [](const EmbeddedSet& set) {
        std::vector<TrialSet> out;
        out.push_back(build_trials(set, Scenario::S1));
        out.push_back(build_trials(set, Scenario::S2));
        TrialSet s3 = out.back();
        s3.scenario = Scenario::S3;
        out.push_back(std::move(s3));
        return out;
      };
      for (std::size_t p = 0; p < plans.size(); ++p) arms.emplace_back(plans[p].arch.tag(), scenario_sets(test_sets[p]));

      if (score_fusion) {
        // plans[0] is brain, plans[1] the eye model.
        std::vector<TrialSet> fused;
        std::vector<std::vector<TrialSet>> calib;
        if (!cfg.raw_score_fusion) {
          for (std::size_t p = 0; p < 2; ++p)
            calib.push_back(scenario_sets(embed_all(models[p], fd.train, plans[p].inputs, plan.train[f])));
        }
        for (std::size_t s = 0; s < 3; ++s) {
          std::optional<fusion::ScoreNormalizer> norm;
          if (!cfg.raw_score_fusion) {
            const auto pairs = score_pairs(calib[1][s], calib[0][s]);
            norm = fusion::fit_normalizer(pairs);
          }
          fused.push_back(fuse_trials(arms[1].second[s], arms[0].second[s], *cfg.fusion, norm));
        }
        std::string name = "fused-" + std::string(fusion::rule_tag(*cfg.fusion));
        if (cfg.raw_score_fusion) name += "-raw";
        arms.emplace_back(name, std::move(fused));
      }

      if (f == 0) {
        for (const auto& a : arms) arm_names.push_back(a.first);
        kept.resize(arms.size(), std::vector<std::vector<TrialSet>>(3));
      }
      for (std::size_t a = 0; a < arms.size(); ++a) {
        ArmReport ar;
        ar.name = arms[a].first;
        const EmbeddedSet& ref = test_sets[std::min(a, test_sets.size() - 1)];
        for (std::size_t s = 0; s < 3; ++s) {
          const TrialSet& ts = arms[a].second[s];
          ScenarioMetrics m = summarize(ts, kScenarios[s]);
          m.round_violations = audit_round_exclusion(ts, ref);
          for (const auto& t : ts.trials)
            if (train_ids.count(ts.subjects[t.claimed]) || train_ids.count(ts.subjects[t.verif_subject]))
              ++fr.subject_violations;
          ar.scenarios.push_back(std::move(m));
          kept[a][s].push_back(ts);
        }
        fr.arms.push_back(std::move(ar));
      }
      report.folds.push_back(std::move(fr));
      result.models.push_back(std::move(models));
    } catch (const Error& e) {
      throw EvalError("fold " + std::to_string(f) + ": " + e.what());
    }
  }

  for (std::size_t a = 0; a < arm_names.size(); ++a) {
    ArmReport ar;
    ar.name = arm_names[a];
    for (std::size_t s = 0; s < 3; ++s) {
      std::vector<const TrialSet*> parts;
      for (const auto& ts : kept[a][s]) parts.push_back(&ts);
      ScenarioMetrics m = summarize(merge(parts), kScenarios[s]);
      double sum = 0;
      for (const auto& fr : report.folds) sum += fr.arms[a].scenarios[s].eer;
      m.fold_mean_eer = sum / static_cast<double>(report.folds.size());
      ar.scenarios.push_back(std::move(m));
    }
    report.pooled.push_back(std::move(ar));
  }
  return result;
}

}  // namespace biofuse::metrics
