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

#include <json.hpp>

#include "biofuse/error.hpp"
#include "biofuse/preprocess.hpp"
#include "biofuse/tnn/arch.hpp"

namespace biofuse::tnn {
namespace {

// Output shape of a layer stack; throws ValidationError on impossible shapes.
void propagate(const std::vector<LayerSpec>& layers, int& c, int& l, const std::string& where) {
  for (const auto& ly : layers) {
    switch (ly.kind) {
      case LayerKind::Conv1d:
        if (ly.width < 1 || ly.filters < 1 || ly.stride < 1)
          throw ValidationError(where + ": conv needs positive width, filters, stride");
        if (ly.width > l) throw ValidationError(where + ": conv kernel wider than its input");
        l = (l - ly.width) / ly.stride + 1;
        c = ly.filters;
        break;
      case LayerKind::Relu:
        break;
      case LayerKind::MaxPool:
        if (ly.width < 1 || ly.width > l) throw ValidationError(where + ": invalid pool width");
        l /= ly.width;
        break;
      case LayerKind::Dense:
        if (ly.width < 1) throw ValidationError(where + ": dense needs positive units");
        c = ly.width;
        l = 1;
        break;
    }
  }
}

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv1d: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "pool";
    case LayerKind::Dense: return "dense";
  }
  return "?";
}

LayerKind kind_from(const std::string& s) {
  if (s == "conv") return LayerKind::Conv1d;
  if (s == "relu") return LayerKind::Relu;
  if (s == "pool") return LayerKind::MaxPool;
  if (s == "dense") return LayerKind::Dense;
  throw ParseError("arch: unknown layer type '" + s + "'");
}

nlohmann::ordered_json layers_json(const std::vector<LayerSpec>& layers) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& ly : layers)
    arr.push_back({{"type", kind_name(ly.kind)}, {"width", ly.width}, {"filters", ly.filters}, {"stride", ly.stride}});
  return arr;
}

std::vector<LayerSpec> layers_from(const nlohmann::json& arr) {
  std::vector<LayerSpec> out;
  for (const auto& j : arr)
    out.push_back({kind_from(j.at("type").get<std::string>()), j.at("width").get<int>(), j.at("filters").get<int>(),
                   j.at("stride").get<int>()});
  return out;
}

BranchSpec branch(Modality m, int out_dim) {
  return {m, channel_count(m), kSampleLength, default_branch_layers(out_dim)};
}

}  // namespace

std::vector<LayerSpec> default_branch_layers(int out_dim) {
  return {LayerSpec::conv(7, 32), LayerSpec::relu(),   LayerSpec::pool(2),      LayerSpec::conv(5, 64),
          LayerSpec::relu(),      LayerSpec::pool(2),  LayerSpec::dense(128),   LayerSpec::relu(),
          LayerSpec::dense(out_dim)};
}

ArchSpec ArchSpec::single(Modality m) { return {ArchKind::Single, {branch(m, 32)}, {}}; }

ArchSpec ArchSpec::fusion_a(Modality eye) {
  return {ArchKind::FusionA, {branch(Modality::Brain, 16), branch(eye, 16)}, {}};
}

ArchSpec ArchSpec::fusion_b(Modality eye) {
  return {ArchKind::FusionB, {branch(Modality::Brain, 16), branch(eye, 16)}, {LayerSpec::dense(32)}};
}

int ArchSpec::embedding_dim() const {
  int total = 0;
  for (const auto& b : branches) {
    int c = b.channels, l = b.length;
    propagate(b.layers, c, l, "branch");
    total += c * l;
  }
  int c = total, l = 1;
  propagate(head, c, l, "head");
  return c * l;
}

std::string ArchSpec::tag() const {
  switch (kind) {
    case ArchKind::Single:
      return branches.empty() ? "single" : std::string(modality_tag(branches[0].modality));
    case ArchKind::FusionA:
      return "fusion-a:" + (branches.size() > 1 ? std::string(modality_tag(branches[1].modality)) : "?");
    case ArchKind::FusionB:
      return "fusion-b:" + (branches.size() > 1 ? std::string(modality_tag(branches[1].modality)) : "?");
  }
  return "?";
}

void ArchSpec::validate() const {
  const std::size_t want = kind == ArchKind::Single ? 1 : 2;
  if (branches.size() != want)
    throw ValidationError("arch " + tag() + ": expected " + std::to_string(want) + " branch(es)");
  if (kind != ArchKind::Single) {
    if (branches[0].modality != Modality::Brain || !is_eye(branches[1].modality))
      throw ValidationError("arch " + tag() + ": fusion branches must be (brain, eye)");
  }
  if (kind != ArchKind::FusionB && !head.empty())
    throw ValidationError("arch " + tag() + ": only fusion-b carries head layers");
  for (const auto& b : branches) {
    if (b.channels != channel_count(b.modality) || b.length < 1)
      throw ValidationError("arch " + tag() + ": branch input shape does not match modality");
  }
  if (embedding_dim() < 1) throw ValidationError("arch " + tag() + ": empty embedding");
}

std::string arch_to_json(const ArchSpec& arch) {
  nlohmann::ordered_json j;
  j["kind"] = arch.kind == ArchKind::Single ? "single" : arch.kind == ArchKind::FusionA ? "fusion-a" : "fusion-b";
  auto br = nlohmann::ordered_json::array();
  for (const auto& b : arch.branches)
    br.push_back({{"modality", std::string(modality_tag(b.modality))},
                  {"channels", b.channels},
                  {"length", b.length},
                  {"layers", layers_json(b.layers)}});
  j["branches"] = br;
  j["head"] = layers_json(arch.head);
  j["embedding_dim"] = arch.embedding_dim();
  return j.dump();
}

ArchSpec arch_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ArchSpec a;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "single") a.kind = ArchKind::Single;
    else if (kind == "fusion-a") a.kind = ArchKind::FusionA;
    else if (kind == "fusion-b") a.kind = ArchKind::FusionB;
    else throw ParseError("arch: unknown kind '" + kind + "'");
    for (const auto& b : j.at("branches"))
      a.branches.push_back({parse_modality(b.at("modality").get<std::string>()), b.at("channels").get<int>(),
                            b.at("length").get<int>(), layers_from(b.at("layers"))});
    a.head = layers_from(j.at("head"));
    a.validate();
    if (a.embedding_dim() != j.at("embedding_dim").get<int>())
      throw ParseError("arch: embedding_dim does not match the layer stack");
    return a;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("arch: ") + e.what());
  }
}

}  // namespace biofuse::tnn
