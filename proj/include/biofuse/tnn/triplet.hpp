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

#include <cstddef>
#include <span>
#include <vector>

#include "biofuse/tnn/network.hpp"

namespace biofuse::tnn {

// max(|fa - fp|^2 - |fa - fn|^2 + margin, 0). Throws ShapeError on
// dimension mismatch.
double triplet_loss(std::span<const double> fa, std::span<const double> fp, std::span<const double> fn,
                    double margin);
double triplet_loss(std::span<const float> fa, std::span<const float> fp, std::span<const float> fn,
                    double margin);

// Indices into a batch.
struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;

  bool operator==(const Triplet&) const = default;
};

// For every ordered anchor/positive pair (anchor != positive, same label)
// picks the closest negative with d_ap < d_an < d_ap + margin (squared
// distances); when none exists, the closest negative overall. Ties go to the
// lowest batch index. `embeddings` is row-major [labels.size() x dim].
// Throws MiningError when the batch has one label or no positive pair.
std::vector<Triplet> mine_triplets(std::span<const double> embeddings, std::size_t dim, std::span<const int> labels,
                                   double margin);

// Mean triplet loss over `triplets` and its gradient with respect to each
// batch embedding (rows of `embeddings`, same layout as above).
struct EmbeddingGradient {
  double mean_loss = 0;
  std::size_t active = 0;     // triplets with positive loss
  std::vector<double> d_emb;  // [n x dim]
};

EmbeddingGradient triplet_embedding_gradient(std::span<const double> embeddings, std::size_t dim,
                                             std::span<const Triplet> triplets, double margin);

// Forward + backward over one batch: gradient of the mean triplet loss with
// respect to all network weights. `inputs[i]` holds one span per branch.
template <typename T>
struct BatchGradient {
  double mean_loss = 0;
  std::size_t active = 0;
  std::vector<T> grad;
};

template <typename T>
BatchGradient<T> triplet_loss_gradient(const Network<T>& net, std::span<const T> weights,
                                       std::span<const std::vector<std::span<const T>>> inputs,
                                       std::span<const Triplet> triplets, double margin);

// Mean triplet loss only, on the same inputs; used by finite-difference checks.
template <typename T>
double triplet_mean_loss(const Network<T>& net, std::span<const T> weights,
                         std::span<const std::vector<std::span<const T>>> inputs, std::span<const Triplet> triplets,
                         double margin);

}  // namespace biofuse::tnn
