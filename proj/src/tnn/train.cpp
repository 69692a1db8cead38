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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "biofuse/error.hpp"
#include "biofuse/tnn/train.hpp"
#include "biofuse/tnn/triplet.hpp"

namespace biofuse::tnn {
namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

class OptimizerState {
 public:
  OptimizerState(const TrainConfig& cfg, std::size_t n) : cfg_(cfg) {
    if (cfg.optimizer == Optimizer::Adam) {
      m_.assign(n, 0.0);
      v_.assign(n, 0.0);
    }
  }

  void step(std::span<float> w, std::span<const float> g) {
    const double lr = cfg_.learning_rate;
    if (cfg_.optimizer == Optimizer::Sgd) {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(w[i] - lr * g[i]);
      return;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < w.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * static_cast<double>(g[i]) * g[i];
      const double mh = m_[i] / c1;
      const double vh = v_[i] / c2;
      w[i] = static_cast<float>(w[i] - lr * mh / (std::sqrt(vh) + kAdamEps));
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<double> m_, v_;
  long long t_ = 0;
};

bool mineable(std::span<const int> labels) {
  std::set<int> seen, dup;
  for (int l : labels)
    if (!seen.insert(l).second) dup.insert(l);
  return seen.size() >= 2 && !dup.empty();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(margin > 0)) throw ValidationError("train: margin must be > 0");
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate))
    throw ValidationError("train: learning_rate must be finite and >= 0");
  if (batch_size < 2) throw ValidationError("train: batch_size must be >= 2");
  if (epochs < 1) throw ValidationError("train: epochs must be >= 1");
}

Example make_example(int label, std::span<const Sample* const> inputs) {
  Example ex;
  ex.label = label;
  for (const Sample* s : inputs) ex.inputs.emplace_back(s->data.begin(), s->data.end());
  return ex;
}

TrainResult train(std::span<const Example> data, const ArchSpec& arch, const TrainConfig& cfg,
                  const std::string& fold) {
  cfg.validate();
  {
    std::set<int> labels;
    for (const auto& ex : data) labels.insert(ex.label);
    if (labels.size() < 2) throw ValidationError("train: dataset must contain at least two subjects");
  }
  const Network<float> net(arch);
  TrainResult result;
  EmbeddingModel& model = result.model;
  model.arch = arch;
  model.weights.assign(net.n_weights(), 0.0f);
  net.init_weights(model.weights, cfg.seed);
  model.provenance = {cfg.seed, cfg.epochs, cfg.batch_size, cfg.margin, cfg.learning_rate, cfg.optimizer, fold};

  OptimizerState opt(cfg, net.n_weights());
  std::mt19937_64 rng(cfg.seed ^ 0x5DEECE66Dull);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto dim = static_cast<std::size_t>(net.embedding_dim());

  std::vector<Network<float>::Cache> caches(static_cast<std::size_t>(cfg.batch_size));
  std::vector<float> grad(net.n_weights());
  std::vector<float> de(dim);
  long long step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t n = end - begin;
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = data[order[begin + i]].label;
      if (!mineable(labels)) continue;

      std::vector<double> emb(n * dim);
      for (std::size_t i = 0; i < n; ++i) {
        const Example& ex = data[order[begin + i]];
        std::vector<std::span<const float>> in(ex.inputs.begin(), ex.inputs.end());
        net.forward(model.weights, in, caches[i]);
        std::copy(caches[i].embedding.begin(), caches[i].embedding.end(), emb.begin() + static_cast<std::ptrdiff_t>(i * dim));
      }
      const auto triplets = mine_triplets(emb, dim, labels, cfg.margin);
      const EmbeddingGradient eg = triplet_embedding_gradient(emb, dim, triplets, cfg.margin);
      loss_sum += eg.mean_loss;
      ++batches;

      std::fill(grad.begin(), grad.end(), 0.0f);
      for (std::size_t i = 0; i < n; ++i) {
        bool any = false;
        for (std::size_t k = 0; k < dim; ++k) {
          de[k] = static_cast<float>(eg.d_emb[i * dim + k]);
          any = any || de[k] != 0.0f;
        }
        if (any) net.backward(model.weights, caches[i], de, grad);
      }
      opt.step(model.weights, grad);
      ++step;
      for (float w : model.weights)
        if (!std::isfinite(w))
          throw DivergenceError("train: non-finite weight after step " + std::to_string(step) + " (epoch " +
                                std::to_string(epoch) + ", fold " + fold + ")");
    }
    result.epoch_loss.push_back(batches > 0 ? loss_sum / batches : 0.0);
  }
  return result;
}

}  // namespace biofuse::tnn
