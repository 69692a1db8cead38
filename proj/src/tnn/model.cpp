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

#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "binary_io.hpp"
#include "biofuse/error.hpp"
#include "biofuse/tnn/model.hpp"

namespace biofuse::tnn {
namespace {

constexpr const char* kMagic = "BIOFUSE-MODEL";
constexpr const char* kVersion = "v1";

std::string expect_block(std::istream& in, const std::string& key) {
  const std::string line = detail::get_line(in, "model");
  if (line.rfind(key + " ", 0) != 0) throw ParseError("model: expected '" + key + "' block");
  return line.substr(key.size() + 1);
}

nlohmann::ordered_json standardizer_json(const Standardizer& s) {
  return {{"modality", std::string(modality_tag(s.modality))}, {"scope", s.scope}, {"mean", s.mean},
          {"stddev", s.stddev}};
}

}  // namespace

std::string_view optimizer_name(Optimizer o) { return o == Optimizer::Adam ? "adam" : "sgd"; }

Optimizer parse_optimizer(std::string_view s) {
  if (s == "adam") return Optimizer::Adam;
  if (s == "sgd") return Optimizer::Sgd;
  throw ValidationError("unknown optimizer '" + std::string(s) + "'");
}

bool bitwise_equal(const EmbeddingModel& a, const EmbeddingModel& b) {
  if (!(a.arch == b.arch) || !(a.provenance == b.provenance) || a.weights.size() != b.weights.size() ||
      a.standardizers.size() != b.standardizers.size())
    return false;
  for (std::size_t i = 0; i < a.weights.size(); ++i)
    if (std::bit_cast<std::uint32_t>(a.weights[i]) != std::bit_cast<std::uint32_t>(b.weights[i])) return false;
  for (std::size_t i = 0; i < a.standardizers.size(); ++i) {
    const auto& x = a.standardizers[i];
    const auto& y = b.standardizers[i];
    if (x.modality != y.modality || x.scope != y.scope || x.mean != y.mean || x.stddev != y.stddev) return false;
  }
  return true;
}

Embedder::Embedder(const EmbeddingModel& model) : model_(model), net_(model.arch) {
  if (model.weights.size() != net_.n_weights())
    throw ShapeError("model " + model.arch.tag() + ": weight count does not match its architecture");
  buffers_.resize(model.arch.branches.size());
}

std::vector<float> Embedder::operator()(std::span<const Sample* const> inputs) {
  const auto& branches = model_.arch.branches;
  if (inputs.size() != branches.size())
    throw ShapeError("model " + model_.arch.tag() + " expects " + std::to_string(branches.size()) +
                     " input sample(s), got " + std::to_string(inputs.size()));
  std::vector<std::span<const float>> spans;
  for (std::size_t b = 0; b < branches.size(); ++b) {
    const Sample& s = *inputs[b];
    if (s.modality != branches[b].modality)
      throw ShapeError("model " + model_.arch.tag() + ": branch " + std::to_string(b) + " expects " +
                       std::string(modality_tag(branches[b].modality)) + ", got " +
                       std::string(modality_tag(s.modality)));
    if (s.data.size() != net_.input_size(b))
      throw ShapeError("model " + model_.arch.tag() + ": sample has " + std::to_string(s.data.size()) +
                       " values, expected " + std::to_string(net_.input_size(b)));
    buffers_[b].assign(s.data.begin(), s.data.end());
    spans.emplace_back(buffers_[b]);
  }
  net_.forward(model_.weights, spans, cache_);
  return cache_.embedding;
}

std::vector<float> Embedder::operator()(const Sample& s) {
  const Sample* in[] = {&s};
  return (*this)(in);
}

std::vector<float> Embedder::operator()(const Sample& brain, const Sample& eye) {
  const Sample* in[] = {&brain, &eye};
  return (*this)(in);
}

std::vector<float> embed(const EmbeddingModel& model, const Sample& s) { return Embedder(model)(s); }

std::vector<float> embed(const EmbeddingModel& model, const Sample& brain, const Sample& eye) {
  return Embedder(model)(brain, eye);
}

void save_model(const EmbeddingModel& model, std::ostream& out) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "arch " << arch_to_json(model.arch) << '\n';
  out << "weights " << model.weights.size() << '\n';
  for (float w : model.weights) detail::put_f32(out, w);
  out << '\n';
  nlohmann::ordered_json prov{{"seed", model.provenance.seed},
                              {"epochs", model.provenance.epochs},
                              {"batch_size", model.provenance.batch_size},
                              {"margin", model.provenance.margin},
                              {"learning_rate", model.provenance.learning_rate},
                              {"optimizer", std::string(optimizer_name(model.provenance.optimizer))},
                              {"fold", model.provenance.fold}};
  out << "provenance " << prov.dump() << '\n';
  auto st = nlohmann::ordered_json::array();
  for (const auto& s : model.standardizers) st.push_back(standardizer_json(s));
  out << "standardizers " << st.dump() << '\n';
  out << "end\n";
  if (!out) throw Error("save_model: write failed");
}

void save_model(const EmbeddingModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  save_model(model, out);
}

EmbeddingModel load_model(std::istream& in) {
  detail::expect_magic(detail::get_line(in, "model"), kMagic, kVersion, "model");
  EmbeddingModel m;
  m.arch = arch_from_json(expect_block(in, "arch"));
  const std::string count = expect_block(in, "weights");
  std::size_t n = 0;
  try {
    n = std::stoull(count);
  } catch (const std::exception&) {
    throw ParseError("model: bad weight count");
  }
  const Network<float> net(m.arch);
  if (n != net.n_weights()) throw ParseError("model: weight count does not match the architecture");
  m.weights.resize(n);
  for (auto& w : m.weights) w = detail::get_f32(in, "model");
  if (!detail::get_line(in, "model").empty()) throw ParseError("model: malformed weight payload");
  try {
    const auto prov = nlohmann::json::parse(expect_block(in, "provenance"));
    m.provenance.seed = prov.at("seed").get<std::uint64_t>();
    m.provenance.epochs = prov.at("epochs").get<int>();
    m.provenance.batch_size = prov.at("batch_size").get<int>();
    m.provenance.margin = prov.at("margin").get<double>();
    m.provenance.learning_rate = prov.at("learning_rate").get<double>();
    m.provenance.optimizer = parse_optimizer(prov.at("optimizer").get<std::string>());
    m.provenance.fold = prov.at("fold").get<std::string>();
    for (const auto& s : nlohmann::json::parse(expect_block(in, "standardizers"))) {
      Standardizer st;
      st.modality = parse_modality(s.at("modality").get<std::string>());
      st.scope = s.at("scope").get<std::string>();
      st.mean = s.at("mean").get<std::vector<double>>();
      st.stddev = s.at("stddev").get<std::vector<double>>();
      if (static_cast<int>(st.mean.size()) != channel_count(st.modality) || st.stddev.size() != st.mean.size())
        throw ParseError("model: standardizer size mismatch");
      m.standardizers.push_back(std::move(st));
    }
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  if (detail::get_line(in, "model") != "end") throw ParseError("model: missing 'end'");
  return m;
}

EmbeddingModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model '" + path.string() + "'");
  return load_model(in);
}

}  // namespace biofuse::tnn
