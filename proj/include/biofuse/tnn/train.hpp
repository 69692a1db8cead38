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

#include "biofuse/tnn/model.hpp"

namespace biofuse::tnn {

struct TrainConfig {
  double margin = 0.2;
  int batch_size = 32;
  int epochs = 8;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::Adam;
  std::uint64_t seed = 1;
  bool deterministic = true;

  void validate() const;  // throws ValidationError
};

// One training input: integer subject label and one float buffer per branch.
struct Example {
  int label = 0;
  std::vector<std::vector<float>> inputs;
};

// Converts aligned per-branch samples into an Example.
Example make_example(int label, std::span<const Sample* const> inputs);

struct TrainResult {
  EmbeddingModel model;
  std::vector<double> epoch_loss;  // mean mined-triplet loss per epoch
};

// Seeded shuffle into mini-batches; per batch: embed, mine, one optimizer
// step on the mean triplet loss. Batches that cannot be mined (one subject or
// no positive pair) are skipped. Throws ValidationError when the data has
// fewer than two subjects and DivergenceError on a non-finite weight.
TrainResult train(std::span<const Example> data, const ArchSpec& arch, const TrainConfig& cfg,
                  const std::string& fold);

}  // namespace biofuse::tnn
