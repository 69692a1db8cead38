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

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace biofuse {

// Enrollment material for one identity.
struct Template {
  std::string identity;
  std::vector<float> vector;
  int round_id = 0;
  std::string arch_tag;

  bool operator==(const Template&) const = default;
};

class TemplateStore {
 public:
  void enroll(Template t);

  bool contains(const std::string& identity) const { return by_id_.count(identity) != 0; }

  // Throws IdentityError for an unknown identity.
  const std::vector<Template>& templates(const std::string& identity) const;

  std::vector<std::string> identities() const;
  std::size_t size() const;
  const std::map<std::string, std::vector<Template>>& entries() const { return by_id_; }

  bool operator==(const TemplateStore&) const = default;

 private:
  std::map<std::string, std::vector<Template>> by_id_;
};

// "BIOFUSE-TPL v1", see docs/formats.md.
void save_templates(const TemplateStore& store, const std::filesystem::path& path);
TemplateStore load_templates(const std::filesystem::path& path);

// Negated Euclidean distance. Throws ContractError on dimension mismatch.
double similarity(std::span<const float> e, std::span<const float> v);
double similarity(std::span<const double> e, std::span<const double> v);

struct Match {
  double score = 0;
  std::size_t index = 0;  // position in the template list
  int round_id = 0;
};

// Highest similarity; ties go to the lower round_id, then the earlier
// template. Throws ContractError on an empty list.
Match best_match(std::span<const float> probe, std::span<const Template> templates);

enum class Scenario { S1, S2, S3 };
std::string_view scenario_tag(Scenario s);  // "s1", "s2", "s3"
Scenario parse_scenario(std::string_view tag);

struct Threshold {
  enum class Kind { Global, PerUser };
  Kind kind = Kind::Global;
  double global = 0;
  std::map<std::string, double> per_user;

  static Threshold fixed(double theta) { return {Kind::Global, theta, {}}; }
  static Threshold tailored(std::map<std::string, double> thetas) { return {Kind::PerUser, 0, std::move(thetas)}; }

  // Throws IdentityError when a PerUser threshold lacks the identity.
  double resolve(const std::string& identity) const;
};

struct Decision {
  bool accept = false;
  double score = 0;
  double threshold = 0;
  Scenario scenario = Scenario::S1;
  std::string identity;
  int matched_round = -1;
};

// accept iff score >= threshold.
Decision decide(double score, const Threshold& threshold, const std::string& identity, Scenario scenario,
                int matched_round = -1);

struct LabeledScore {
  std::string identity;  // claimed identity
  double score = 0;
  bool genuine = false;
};

// Global: threshold at the pooled EER point. PerUser: each identity's own
// EER point. Throws CalibrationError when an identity (PerUser) or the pool
// (Global) lacks genuine or impostor scores.
Threshold calibrate_thresholds(std::span<const LabeledScore> scores, Threshold::Kind mode);

}  // namespace biofuse
