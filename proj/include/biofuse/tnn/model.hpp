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
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "biofuse/preprocess.hpp"
#include "biofuse/tnn/arch.hpp"
#include "biofuse/tnn/network.hpp"

namespace biofuse::tnn {

enum class Optimizer { Sgd, Adam };

struct Provenance {
  std::uint64_t seed = 0;
  int epochs = 0;
  int batch_size = 0;
  double margin = 0;
  double learning_rate = 0;
  Optimizer optimizer = Optimizer::Adam;
  std::string fold;

  bool operator==(const Provenance&) const = default;
};

// One trained twin-network branch (or fused pair of branches), plus the
// standardizers fitted for its inputs so the model file is self-contained.
struct EmbeddingModel {
  ArchSpec arch;
  std::vector<float> weights;
  Provenance provenance;
  std::vector<Standardizer> standardizers;  // one per branch, may be empty
};

bool bitwise_equal(const EmbeddingModel& a, const EmbeddingModel& b);

// Embeds already standardized samples; one sample per branch, in branch
// order. Output is L2-normalised. Throws ShapeError on any mismatch.
class Embedder {
 public:
  explicit Embedder(const EmbeddingModel& model);

  std::vector<float> operator()(std::span<const Sample* const> inputs);
  std::vector<float> operator()(const Sample& s);
  std::vector<float> operator()(const Sample& brain, const Sample& eye);

  int dim() const { return net_.embedding_dim(); }

 private:
  const EmbeddingModel& model_;
  Network<float> net_;
  Network<float>::Cache cache_;
  std::vector<std::vector<float>> buffers_;
};

std::vector<float> embed(const EmbeddingModel& model, const Sample& s);
std::vector<float> embed(const EmbeddingModel& model, const Sample& brain, const Sample& eye);

// "BIOFUSE-MODEL v1": text header, arch block, float32 LE weights,
// provenance and standardizer blocks. See docs/formats.md.
void save_model(const EmbeddingModel& model, std::ostream& out);
void save_model(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_model(std::istream& in);
EmbeddingModel load_model(const std::filesystem::path& path);

std::string_view optimizer_name(Optimizer o);
Optimizer parse_optimizer(std::string_view s);

}  // namespace biofuse::tnn
