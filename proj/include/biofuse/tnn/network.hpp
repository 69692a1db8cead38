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
#include <vector>

#include "biofuse/tnn/arch.hpp"

namespace biofuse::tnn {

// Forward/backward engine for an ArchSpec over a flat weight vector.
// Instantiated for float (training, inference) and double (gradient checks).
template <typename T>
class Network {
 public:
  explicit Network(ArchSpec arch);

  const ArchSpec& arch() const { return arch_; }
  std::size_t n_weights() const { return n_weights_; }
  int embedding_dim() const { return embedding_dim_; }
  std::size_t input_size(std::size_t branch) const;

  // Activations kept for the backward pass. Reusable across calls.
  struct Cache {
    std::vector<std::vector<std::vector<T>>> branch_acts;  // [branch][layer + 1]
    std::vector<std::vector<std::vector<std::uint32_t>>> branch_argmax;
    std::vector<std::vector<T>> head_acts;  // [head layer + 1], [0] is the concat
    std::vector<std::vector<std::uint32_t>> head_argmax;
    T norm = 0;
    std::vector<T> embedding;
  };

  // One input span per branch, each [channels x length]. Throws ShapeError.
  void forward(std::span<const T> weights, std::span<const std::span<const T>> inputs, Cache& cache) const;

  // Accumulates d(loss)/d(weights) into grad given d(loss)/d(embedding).
  void backward(std::span<const T> weights, const Cache& cache, std::span<const T> d_embedding,
                std::span<T> grad) const;

  // He-style uniform fan-in initialisation, zero biases.
  void init_weights(std::span<T> weights, std::uint64_t seed) const;

 private:
  struct Op {
    LayerKind kind;
    int in_c, in_l, out_c, out_l;
    int width, stride;
    std::size_t w_off, b_off;
  };

  std::size_t plan(const std::vector<LayerSpec>& layers, int c, int l, std::size_t off, std::vector<Op>& ops,
                   int& out_c, int& out_l);
  void run_forward(const std::vector<Op>& ops, std::span<const T> weights, std::vector<std::vector<T>>& acts,
                   std::vector<std::vector<std::uint32_t>>& argmax) const;
  void run_backward(const std::vector<Op>& ops, std::span<const T> weights, const std::vector<std::vector<T>>& acts,
                    const std::vector<std::vector<std::uint32_t>>& argmax, std::vector<T> d_out, std::span<T> grad,
                    std::vector<T>* d_in) const;

  ArchSpec arch_;
  std::vector<std::vector<Op>> branch_ops_;
  std::vector<int> branch_out_;
  std::vector<Op> head_ops_;
  std::size_t n_weights_ = 0;
  int embedding_dim_ = 0;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace biofuse::tnn
