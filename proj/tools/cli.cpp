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

#include "cli.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "biofuse/error.hpp"
#include "biofuse/fusion.hpp"
#include "biofuse/tnn/model.hpp"

namespace biofuse::cli {
namespace {

using json = nlohmann::json;

// Strict reader for one JSON object section.
class Section {
 public:
  Section(const json& root, std::string name) : name_(std::move(name)) {
    if (!root.contains(name_)) return;
    obj_ = &root.at(name_);
    if (!obj_->is_object()) throw ValidationError("config: section '" + name_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& dst) {
    if (!obj_ || !obj_->contains(key)) return;
    seen_.insert(key);
    const json& v = obj_->at(key);
    const bool ok = [&] {
      if constexpr (std::is_same_v<T, bool>) return v.is_boolean();
      else if constexpr (std::is_integral_v<T>) return v.is_number_integer();
      else if constexpr (std::is_floating_point_v<T>) return v.is_number();
      else return v.is_string();
    }();
    if (!ok) throw ValidationError("config: '" + name_ + "." + key + "' has the wrong type");
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (v.get<std::int64_t>() < 0 && !v.is_number_unsigned())
        throw ValidationError("config: '" + name_ + "." + key + "' must be non-negative");
    }
    dst = v.get<T>();
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [k, v] : obj_->items())
      if (!seen_.count(k)) throw ValidationError("config: unknown key '" + name_ + "." + k + "'");
  }

 private:
  std::string name_;
  const json* obj_ = nullptr;
  std::set<std::string> seen_;
};

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Modality> raw_modalities(metrics::ModelKind kind, Modality fusion_eye) {
  switch (kind) {
    case metrics::ModelKind::Brain: return {Modality::Brain};
    case metrics::ModelKind::Eye: return {Modality::EyeNoPupil};
    case metrics::ModelKind::EyePupil: return {Modality::EyeWithPupil};
    case metrics::ModelKind::FusionA:
    case metrics::ModelKind::FusionB: return {Modality::Brain, fusion_eye};
  }
  return {};
}

std::filesystem::path dataset_file(const std::string& dir, Modality m) {
  return std::filesystem::path(dir) / (std::string(modality_tag(m)) + ".ds");
}

std::string need(const std::string& value, const char* what) {
  if (value.empty()) throw ValidationError(std::string("no ") + what + " path given (flag or config paths section)");
  return value;
}

// Aligned, standardized samples for every branch of `model`.
std::vector<std::vector<Sample>> load_branch_inputs(const tnn::EmbeddingModel& model, const std::string& dir) {
  if (model.standardizers.size() != model.arch.branches.size())
    throw ContractError("model carries no standardizer for each branch");
  std::vector<std::vector<Sample>> data;
  for (const auto& b : model.arch.branches) data.push_back(read_dataset(dataset_file(dir, b.modality)));
  std::vector<std::vector<Sample>*> ptrs;
  for (auto& d : data) ptrs.push_back(&d);
  metrics::align_samples(ptrs);
  for (std::size_t b = 0; b < data.size(); ++b) model.standardizers[b].apply_in_place(data[b]);
  return data;
}

struct Options {
  std::string config, out, corpus, dataset, model, templates, sample, claim, thresholds;
  std::string modality, fusion, scenario;
  std::uint64_t seed = 0;
  bool deterministic = true;
  double threshold = 0;
  std::size_t index = 0;
  std::vector<std::string> holdout, subjects;
  std::vector<int> rounds;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* det_opt = nullptr;
  CLI::Option* threshold_opt = nullptr;
};

RunConfig base_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (!o.modality.empty()) cfg.eval.model = metrics::parse_model_kind(o.modality);
  if (!o.fusion.empty()) {
    if (o.fusion == "none") cfg.eval.fusion.reset();
    else cfg.eval.fusion = fusion::parse_rule(o.fusion);
  }
  if (!o.scenario.empty()) cfg.scenario = parse_scenario(o.scenario);
  if (o.det_opt && o.det_opt->count()) cfg.train.deterministic = o.deterministic;
  return cfg;
}

int cmd_gen(const Options& o, std::ostream& out) {
  RunConfig cfg = base_config(o);
  if (!o.out.empty()) cfg.paths.corpus = o.out;
  if (o.seed_opt->count()) cfg.synth.seed = o.seed;
  cfg.sync();
  cfg.validate();
  const auto path = need(cfg.paths.corpus, "corpus");
  const auto recs = generate_synthetic(cfg.synth);
  write_corpus(recs, path);
  out << "gen: " << recs.size() << " recordings, " << cfg.synth.n_rounds << " rounds x " << cfg.synth.dots_per_round
      << " dots -> " << path << '\n';
  return 0;
}

int cmd_preprocess(const Options& o, std::ostream& out) {
  RunConfig cfg = base_config(o);
  if (!o.corpus.empty()) cfg.paths.corpus = o.corpus;
  if (!o.out.empty()) cfg.paths.dataset = o.out;
  cfg.sync();
  cfg.validate();
  const auto recs = read_corpus(std::filesystem::path(need(cfg.paths.corpus, "corpus")));
  const auto dir = need(cfg.paths.dataset, "dataset");
  std::filesystem::create_directories(dir);
  auto mods = raw_modalities(cfg.eval.model, cfg.eval.fusion_eye);
  if (cfg.eval.fusion) mods.insert(mods.begin(), Modality::Brain);
  out << "preprocess:";
  for (Modality m : mods) {
    const Dataset ds = build_dataset(recs, m, cfg.nan_policy);
    write_dataset(ds.samples, dataset_file(dir, m));
    const RoundCounts t = ds.report.total();
    out << ' ' << modality_tag(m) << " extracted=" << t.extracted << " rejected=" << t.rejected
        << " skipped=" << t.skipped;
  }
  out << " -> " << dir << '\n';
  return 0;
}

// --model, else <models>/<modality>.model as written by train.
std::filesystem::path model_path(const Options& o, const RunConfig& cfg) {
  if (!o.model.empty()) return o.model;
  return std::filesystem::path(need(cfg.paths.models, "models")) /
         (std::string(metrics::model_kind_tag(cfg.eval.model)) + ".model");
}

int cmd_train(const Options& o, std::ostream& out) {
  RunConfig cfg = base_config(o);
  if (!o.dataset.empty()) cfg.paths.dataset = o.dataset;
  if (o.seed_opt->count()) cfg.train.seed = o.seed;
  cfg.sync();
  cfg.validate();
  if (cfg.eval.fusion) throw ValidationError("train: score fusion combines two models; train each modality separately");
  const auto dir = need(cfg.paths.dataset, "dataset");
  const std::filesystem::path target = o.out.empty() ? model_path(o, cfg) : std::filesystem::path(o.out);

  const auto mods = raw_modalities(cfg.eval.model, cfg.eval.fusion_eye);
  std::vector<std::vector<Sample>> data;
  for (Modality m : mods) data.push_back(read_dataset(dataset_file(dir, m)));
  std::vector<std::vector<Sample>*> ptrs;
  for (auto& d : data) ptrs.push_back(&d);
  metrics::align_samples(ptrs);
  const std::set<std::string> holdout(o.holdout.begin(), o.holdout.end());
  for (auto& d : data) std::erase_if(d, [&](const Sample& s) { return holdout.count(s.subject_id) != 0; });

  std::vector<Standardizer> stds;
  for (std::size_t b = 0; b < data.size(); ++b) {
    stds.push_back(fit_standardizer(data[b], mods[b], "train"));
    stds.back().apply_in_place(data[b]);
  }
  std::vector<std::string> subjects;
  for (const auto& s : data[0])
    if (std::find(subjects.begin(), subjects.end(), s.subject_id) == subjects.end()) subjects.push_back(s.subject_id);
  std::sort(subjects.begin(), subjects.end());

  std::vector<tnn::Example> examples;
  std::vector<const Sample*> in(data.size());
  for (std::size_t i = 0; i < data[0].size(); ++i) {
    for (std::size_t b = 0; b < data.size(); ++b) in[b] = &data[b][i];
    const auto label = std::lower_bound(subjects.begin(), subjects.end(), in[0]->subject_id) - subjects.begin();
    examples.push_back(tnn::make_example(static_cast<int>(label), in));
  }
  tnn::ArchSpec arch;
  switch (cfg.eval.model) {
    case metrics::ModelKind::FusionA: arch = tnn::ArchSpec::fusion_a(cfg.eval.fusion_eye); break;
    case metrics::ModelKind::FusionB: arch = tnn::ArchSpec::fusion_b(cfg.eval.fusion_eye); break;
    default: arch = tnn::ArchSpec::single(mods[0]); break;
  }
  auto result = tnn::train(examples, arch, cfg.train, "all");
  result.model.standardizers = stds;
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  tnn::save_model(result.model, target);
  out << "train: " << arch.tag() << " on " << subjects.size() << " subjects, " << examples.size()
      << " samples, loss " << fmt(result.epoch_loss.front()) << " -> " << fmt(result.epoch_loss.back()) << " -> "
      << target.string() << '\n';
  return 0;
}

int cmd_enroll(const Options& o, std::ostream& out) {
  RunConfig cfg = base_config(o);
  if (!o.dataset.empty()) cfg.paths.dataset = o.dataset;
  if (!o.out.empty()) cfg.paths.templates = o.out;
  cfg.sync();
  cfg.validate();
  const auto model = tnn::load_model(model_path(o, cfg));
  const auto data = load_branch_inputs(model, need(cfg.paths.dataset, "dataset"));
  const std::set<std::string> subjects(o.subjects.begin(), o.subjects.end());
  const std::set<int> rounds(o.rounds.begin(), o.rounds.end());

  tnn::Embedder embedder(model);
  TemplateStore store;
  std::vector<const Sample*> in(data.size());
  for (std::size_t i = 0; i < data[0].size(); ++i) {
    const Sample& s = data[0][i];
    if (!subjects.empty() && !subjects.count(s.subject_id)) continue;
    if (!rounds.empty() && !rounds.count(s.round_id)) continue;
    for (std::size_t b = 0; b < data.size(); ++b) in[b] = &data[b][i];
    store.enroll({s.subject_id, embedder(in), s.round_id, model.arch.tag()});
  }
  const auto path = need(cfg.paths.templates, "templates");
  save_templates(store, path);
  out << "enroll: " << store.size() << " templates for " << store.identities().size() << " identities -> " << path
      << '\n';
  return 0;
}

int cmd_verify(const Options& o, std::ostream& out) {
  RunConfig cfg = base_config(o);
  if (!o.templates.empty()) cfg.paths.templates = o.templates;
  if (!o.sample.empty()) cfg.paths.dataset = o.sample;
  cfg.sync();
  cfg.validate();
  if (o.claim.empty()) throw ValidationError("verify: --claim is required");
  const bool per_user = !o.thresholds.empty();
  if (!per_user && !o.threshold_opt->count()) throw ValidationError("verify: give --threshold or --thresholds");
  if (per_user && cfg.scenario != Scenario::S3) throw ValidationError("verify: per-user thresholds apply to s3 only");

  Threshold threshold = Threshold::fixed(o.threshold);
  if (per_user) {
    std::map<std::string, double> thetas;
    json j;
    try {
      j = json::parse(read_file(o.thresholds));
      thetas = j.get<std::map<std::string, double>>();
    } catch (const json::exception& e) {
      throw ValidationError("thresholds file '" + o.thresholds + "': " + e.what());
    }
    threshold = Threshold::tailored(std::move(thetas));
  }

  const auto model = tnn::load_model(model_path(o, cfg));
  const auto store = load_templates(need(cfg.paths.templates, "templates"));
  const auto data = load_branch_inputs(model, need(cfg.paths.dataset, "sample"));
  if (o.index >= data[0].size())
    throw ValidationError("verify: --index " + std::to_string(o.index) + " out of range (" +
                          std::to_string(data[0].size()) + " samples)");
  std::vector<const Sample*> in;
  for (const auto& d : data) in.push_back(&d[o.index]);
  tnn::Embedder embedder(model);
  const auto probe = embedder(in);
  const int probe_round = in[0]->round_id;

  std::vector<Template> candidates;
  for (const auto& t : store.templates(o.claim)) {
    if (t.arch_tag != model.arch.tag())
      throw ContractError("template of '" + o.claim + "' was made by model '" + t.arch_tag + "'");
    if (t.round_id != probe_round) candidates.push_back(t);
  }
  if (candidates.empty()) throw IdentityError("no template of '" + o.claim + "' from a round other than the sample's");
  // S1 compares against a single enrollment sample: the first remaining.
  const std::span<const Template> pool =
      cfg.scenario == Scenario::S1 ? std::span<const Template>(candidates.data(), 1) : std::span<const Template>(candidates);
  const Match m = best_match(probe, pool);
  const Decision d = decide(m.score, threshold, o.claim, cfg.scenario, m.round_id);
  out << (d.accept ? "ACCEPT" : "REJECT") << " claim=" << o.claim << " score=" << fmt(d.score)
      << " threshold=" << fmt(d.threshold) << " scenario=" << scenario_tag(d.scenario)
      << " matched_round=" << d.matched_round << '\n';
  return 0;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  RunConfig cfg = base_config(o);
  if (!o.corpus.empty()) cfg.paths.corpus = o.corpus;
  if (!o.out.empty()) cfg.paths.report = o.out;
  if (o.seed_opt->count()) cfg.train.seed = o.seed;
  cfg.sync();
  cfg.validate();
  const auto report_path = need(cfg.paths.report, "report");
  const auto recs = read_corpus(std::filesystem::path(need(cfg.paths.corpus, "corpus")));
  const auto result = metrics::run_experiment(recs, cfg.eval);
  const std::filesystem::path rp(report_path);
  if (rp.has_parent_path()) std::filesystem::create_directories(rp.parent_path());
  {
    std::ofstream f(rp, std::ios::binary);
    f << result.report.to_json();
    if (!f) throw Error("cannot write report '" + report_path + "'");
  }
  {
    std::ofstream f(report_path + ".tsv", std::ios::binary);
    f << result.report.to_table();
    if (!f) throw Error("cannot write table '" + report_path + ".tsv'");
  }
  out << "evaluate: " << result.report.folds.size() << " folds, " << scenario_tag(cfg.scenario);
  for (const auto& arm : result.report.pooled) out << ' ' << arm.name << " eer=" << fmt(arm.at(cfg.scenario).eer);
  out << " -> " << report_path << '\n';
  return 0;
}

}  // namespace

void RunConfig::sync() {
  eval.nan_policy = nan_policy;
  eval.train = train;
}

void RunConfig::validate() const {
  synth.validate();
  nan_policy.validate();
  train.validate();
  eval.validate();
  std::set<std::filesystem::path> seen;
  for (const auto* p : {&paths.corpus, &paths.dataset, &paths.models, &paths.templates, &paths.report}) {
    if (p->empty()) continue;
    if (!seen.insert(std::filesystem::path(*p).lexically_normal()).second)
      throw ValidationError("config: path '" + *p + "' is used for two artifacts");
  }
}

RunConfig parse_run_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (!root.is_object()) throw ValidationError("config: top level must be an object");
  for (const auto& [k, v] : root.items())
    if (k != "paths" && k != "synth" && k != "nan_policy" && k != "train" && k != "eval")
      throw ValidationError("config: unknown section '" + k + "'");

  RunConfig cfg;
  Section p(root, "paths");
  p.get("corpus", cfg.paths.corpus);
  p.get("dataset", cfg.paths.dataset);
  p.get("models", cfg.paths.models);
  p.get("templates", cfg.paths.templates);
  p.get("report", cfg.paths.report);
  p.finish();

  Section s(root, "synth");
  s.get("n_subjects", cfg.synth.n_subjects);
  s.get("n_rounds", cfg.synth.n_rounds);
  s.get("dots_per_round", cfg.synth.dots_per_round);
  s.get("eeg_rate_hz", cfg.synth.eeg_rate_hz);
  s.get("eye_rate_hz", cfg.synth.eye_rate_hz);
  s.get("subject_separability", cfg.synth.subject_separability);
  s.get("blink_rate_per_min", cfg.synth.blink_rate_per_min);
  s.get("noise_sigma", cfg.synth.noise_sigma);
  s.get("seed", cfg.synth.seed);
  s.get("dot_interval_s", cfg.synth.dot_interval_s);
  s.get("round_lead_s", cfg.synth.round_lead_s);
  s.get("rest_interval_s", cfg.synth.rest_interval_s);
  s.finish();

  Section n(root, "nan_policy");
  n.get("max_nan_fraction", cfg.nan_policy.max_nan_fraction);
  n.finish();

  Section t(root, "train");
  std::string optimizer(tnn::optimizer_name(cfg.train.optimizer));
  t.get("margin", cfg.train.margin);
  t.get("batch_size", cfg.train.batch_size);
  t.get("epochs", cfg.train.epochs);
  t.get("learning_rate", cfg.train.learning_rate);
  t.get("optimizer", optimizer);
  t.get("seed", cfg.train.seed);
  t.get("deterministic", cfg.train.deterministic);
  t.finish();
  cfg.train.optimizer = tnn::parse_optimizer(optimizer);

  Section e(root, "eval");
  std::string modality(metrics::model_kind_tag(cfg.eval.model));
  std::string rule = "none";
  std::string fusion_eye(modality_tag(cfg.eval.fusion_eye));
  std::string scenario(scenario_tag(cfg.scenario));
  e.get("modality", modality);
  e.get("fusion", rule);
  e.get("raw_score_fusion", cfg.eval.raw_score_fusion);
  e.get("fusion_eye", fusion_eye);
  e.get("folds", cfg.eval.folds);
  e.get("fold_seed", cfg.eval.fold_seed);
  e.get("scenario", scenario);
  e.finish();
  cfg.eval.model = metrics::parse_model_kind(modality);
  if (rule != "none") cfg.eval.fusion = fusion::parse_rule(rule);
  try {
    cfg.eval.fusion_eye = parse_modality(fusion_eye);
  } catch (const Error& ex) {
    throw ValidationError(std::string("config: eval.fusion_eye: ") + ex.what());
  }
  cfg.scenario = parse_scenario(scenario);

  cfg.sync();
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("config file '" + path.string() + "' does not exist");
  return parse_run_config(read_file(path));
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal eye and brain biometric verification toolkit", "biofuse"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  Options o;

  const std::set<std::string> model_kinds{"brain", "eye", "eye-pupil", "fusion-a", "fusion-b"};
  const std::set<std::string> rules{"none", "max", "min", "mean", "product"};
  const std::set<std::string> scenarios{"s1", "s2", "s3"};

  auto config = [&](CLI::App* sub) { sub->add_option("--config", o.config, "JSON run config"); };
  auto modality = [&](CLI::App* sub) {
    sub->add_option("--modality", o.modality, "Model input")->check(CLI::IsMember(model_kinds));
  };
  auto fusion_opt = [&](CLI::App* sub) {
    sub->add_option("--fusion", o.fusion, "Score fusion rule")->check(CLI::IsMember(rules));
  };
  auto scenario = [&](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario, "Verification scenario")->check(CLI::IsMember(scenarios));
  };
  auto seed = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "Seed override"); };
  auto deterministic = [&](CLI::App* sub) {
    sub->add_flag("--deterministic,!--nondeterministic", o.deterministic, "Deterministic training");
  };

  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus");
  config(gen);
  gen->add_option("--out", o.out, "Corpus path");
  seed(gen);

  auto* pre = app.add_subcommand("preprocess", "Cut, resample and screen samples into datasets");
  config(pre);
  pre->add_option("--corpus", o.corpus, "Corpus path");
  pre->add_option("--out", o.out, "Dataset directory");
  modality(pre);
  fusion_opt(pre);

  auto* train = app.add_subcommand("train", "Train one embedding model");
  config(train);
  train->add_option("--dataset", o.dataset, "Dataset directory");
  train->add_option("--out", o.out, "Model path");
  train->add_option("--holdout", o.holdout, "Subjects left out of training")->delimiter(',');
  modality(train);
  seed(train);
  deterministic(train);

  auto* enroll = app.add_subcommand("enroll", "Embed samples into a template store");
  config(enroll);
  enroll->add_option("--model", o.model, "Model path (default <models>/<modality>.model)");
  enroll->add_option("--dataset", o.dataset, "Dataset directory");
  enroll->add_option("--out", o.out, "Template store path");
  enroll->add_option("--subjects", o.subjects, "Subjects to enroll (default all)")->delimiter(',');
  enroll->add_option("--rounds", o.rounds, "Rounds to enroll (default all)")->delimiter(',');

  auto* verify = app.add_subcommand("verify", "Verify one sample against a claimed identity");
  config(verify);
  verify->add_option("--model", o.model, "Model path (default <models>/<modality>.model)");
  verify->add_option("--templates", o.templates, "Template store path");
  verify->add_option("--sample", o.sample, "Dataset directory holding the sample");
  verify->add_option("--index", o.index, "Sample position in the dataset");
  verify->add_option("--claim", o.claim, "Claimed identity");
  verify->add_option("--threshold", o.threshold, "Global threshold");
  verify->add_option("--thresholds", o.thresholds, "JSON object of per-user thresholds (s3)");
  scenario(verify);

  auto* eval = app.add_subcommand("evaluate", "Cross-validated evaluation of one configuration");
  config(eval);
  eval->add_option("--corpus", o.corpus, "Corpus path");
  eval->add_option("--out", o.out, "Report path");
  modality(eval);
  fusion_opt(eval);
  scenario(eval);
  seed(eval);
  deterministic(eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  o.seed_opt = sub->get_option_no_throw("--seed");
  o.det_opt = sub->get_option_no_throw("--deterministic");
  o.threshold_opt = sub->get_option_no_throw("--threshold");

  try {
    if (gen->parsed()) return cmd_gen(o, out);
    if (pre->parsed()) return cmd_preprocess(o, out);
    if (train->parsed()) return cmd_train(o, out);
    if (enroll->parsed()) return cmd_enroll(o, out);
    if (verify->parsed()) return cmd_verify(o, out);
    if (eval->parsed()) return cmd_evaluate(o, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace biofuse::cli
