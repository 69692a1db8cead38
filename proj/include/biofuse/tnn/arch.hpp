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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "biofuse/corpus.hpp"

namespace biofuse::tnn {

enum class LayerKind { Conv1d, Relu, MaxPool, Dense };

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  int width = 0;    // conv kernel width, pool width, or dense units
  int filters = 0;  // conv only
  int stride = 1;   // conv only

  static LayerSpec conv(int kernel, int filters, int stride = 1) { return {LayerKind::Conv1d, kernel, filters, stride}; }
  static LayerSpec relu() { return {LayerKind::Relu, 0, 0, 1}; }
  static LayerSpec pool(int width) { return {LayerKind::MaxPool, width, 0, 1}; }
  static LayerSpec dense(int units) { return {LayerKind::Dense, units, 0, 1}; }

  bool operator==(const LayerSpec&) const = default;
};

// One convolutional tower over a [channels x length] input.
struct BranchSpec {
  Modality modality = Modality::Brain;
  int channels = 0;
  int length = 0;
  std::vector<LayerSpec> layers;

  bool operator==(const BranchSpec&) const = default;
};

enum class ArchKind { Single, FusionA, FusionB };

// Branch outputs are concatenated, passed through `head`, then L2-normalised.
struct ArchSpec {
  ArchKind kind = ArchKind::Single;
  std::vector<BranchSpec> branches;  // fusion: brain first, eye second
  std::vector<LayerSpec> head;

  int embedding_dim() const;
  std::string tag() const;  // "brain", "eye-pupil", "fusion-a:eye-pupil", ...
  void validate() const;    // throws ValidationError

  static ArchSpec single(Modality m);
  static ArchSpec fusion_a(Modality eye);
  static ArchSpec fusion_b(Modality eye);

  bool operator==(const ArchSpec&) const = default;
};

// conv(7, 32) relu pool(2) conv(5, 64) relu pool(2) dense(128) relu dense(out)
std::vector<LayerSpec> default_branch_layers(int out_dim);

std::string arch_to_json(const ArchSpec& arch);
ArchSpec arch_from_json(const std::string& text);  // throws ParseError

}  // namespace biofuse::tnn
