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

#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "biofuse/error.hpp"
#include "biofuse/metrics/rates.hpp"
#include "biofuse/simd/kernels.hpp"
#include "biofuse/verify.hpp"

namespace biofuse {
namespace {

constexpr const char* kTplMagic = "BIOFUSE-TPL";
constexpr const char* kTplVersion = "v1";

template <typename T>
double similarity_impl(std::span<const T> e, std::span<const T> v) {
  if (e.size() != v.size())
    throw ContractError("similarity: dimension mismatch (" + std::to_string(e.size()) + " vs " +
                        std::to_string(v.size()) + ")");
  return -std::sqrt(simd::squared_distance(e, v));
}

}  // namespace

void TemplateStore::enroll(Template t) {
  if (t.identity.empty()) throw ValidationError("enroll: empty identity");
  auto& list = by_id_[t.identity];
  if (!list.empty() && list.front().vector.size() != t.vector.size())
    throw ShapeError("enroll: template dimension differs from existing templates of '" + t.identity + "'");
  list.push_back(std::move(t));
}

const std::vector<Template>& TemplateStore::templates(const std::string& identity) const {
  const auto it = by_id_.find(identity);
  if (it == by_id_.end()) throw IdentityError("unknown identity '" + identity + "'");
  return it->second;
}

std::vector<std::string> TemplateStore::identities() const {
  std::vector<std::string> ids;
  for (const auto& [id, _] : by_id_) ids.push_back(id);
  return ids;
}

std::size_t TemplateStore::size() const {
  std::size_t n = 0;
  for (const auto& [_, list] : by_id_) n += list.size();
  return n;
}

void save_templates(const TemplateStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << kTplMagic << ' ' << kTplVersion << '\n';
  detail::put_u32(out, static_cast<std::uint32_t>(store.entries().size()));
  for (const auto& [id, list] : store.entries()) {
    detail::put_string(out, id);
    detail::put_u32(out, static_cast<std::uint32_t>(list.size()));
    for (const auto& t : list) {
      detail::put_u32(out, static_cast<std::uint32_t>(t.round_id));
      detail::put_string(out, t.arch_tag);
      detail::put_u32(out, static_cast<std::uint32_t>(t.vector.size()));
      for (float v : t.vector) detail::put_f32(out, v);
    }
  }
  if (!out) throw Error("save_templates: write failed");
}

TemplateStore load_templates(const std::filesystem::path& path) {
  const std::string what = "templates '" + path.string() + "'";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + what);
  detail::expect_magic(detail::get_line(in, what), kTplMagic, kTplVersion, what);
  TemplateStore store;
  const std::uint32_t n_ids = detail::get_u32(in, what);
  for (std::uint32_t i = 0; i < n_ids; ++i) {
    const std::string id = detail::get_string(in, what);
    const std::uint32_t n = detail::get_u32(in, what);
    for (std::uint32_t k = 0; k < n; ++k) {
      Template t;
      t.identity = id;
      t.round_id = static_cast<int>(detail::get_u32(in, what));
      t.arch_tag = detail::get_string(in, what);
      const std::uint32_t dim = detail::get_u32(in, what);
      if (dim > (1u << 16)) throw ParseError(what + ": implausible template dimension");
      t.vector.resize(dim);
      for (auto& v : t.vector) v = detail::get_f32(in, what);
      store.enroll(std::move(t));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError(what + ": trailing data");
  return store;
}

double similarity(std::span<const float> e, std::span<const float> v) { return similarity_impl(e, v); }
double similarity(std::span<const double> e, std::span<const double> v) { return similarity_impl(e, v); }

Match best_match(std::span<const float> probe, std::span<const Template> templates) {
  if (templates.empty()) throw ContractError("best_match: empty template list");
  Match best{similarity(probe, templates[0].vector), 0, templates[0].round_id};
  for (std::size_t i = 1; i < templates.size(); ++i) {
    const double s = similarity(probe, templates[i].vector);
    if (s > best.score || (s == best.score && templates[i].round_id < best.round_id))
      best = {s, i, templates[i].round_id};
  }
  return best;
}

std::string_view scenario_tag(Scenario s) {
  switch (s) {
    case Scenario::S1: return "s1";
    case Scenario::S2: return "s2";
    case Scenario::S3: return "s3";
  }
  return "?";
}

Scenario parse_scenario(std::string_view tag) {
  if (tag == "s1") return Scenario::S1;
  if (tag == "s2") return Scenario::S2;
  if (tag == "s3") return Scenario::S3;
  throw ValidationError("unknown scenario '" + std::string(tag) + "'");
}

double Threshold::resolve(const std::string& identity) const {
  if (kind == Kind::Global) return global;
  const auto it = per_user.find(identity);
  if (it == per_user.end()) throw IdentityError("no tailored threshold for identity '" + identity + "'");
  return it->second;
}

Decision decide(double score, const Threshold& threshold, const std::string& identity, Scenario scenario,
                int matched_round) {
  const double theta = threshold.resolve(identity);
  return {score >= theta, score, theta, scenario, identity, matched_round};
}

Threshold calibrate_thresholds(std::span<const LabeledScore> scores, Threshold::Kind mode) {
  if (mode == Threshold::Kind::Global) {
    std::vector<double> gen, imp;
    for (const auto& s : scores) (s.genuine ? gen : imp).push_back(s.score);
    if (gen.empty() || imp.empty())
      throw CalibrationError("calibrate_thresholds: need genuine and impostor scores");
    return Threshold::fixed(metrics::compute_eer(gen, imp).threshold);
  }
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> per_id;
  for (const auto& s : scores) {
    auto& [gen, imp] = per_id[s.identity];
    (s.genuine ? gen : imp).push_back(s.score);
  }
  std::map<std::string, double> thetas;
  for (const auto& [id, lists] : per_id) {
    if (lists.first.empty() || lists.second.empty())
      throw CalibrationError("calibrate_thresholds: identity '" + id + "' lacks genuine or impostor scores");
    thetas[id] = metrics::compute_eer(lists.first, lists.second).threshold;
  }
  return Threshold::tailored(std::move(thetas));
}

}  // namespace biofuse
