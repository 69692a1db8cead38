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

#include <limits>
#include <set>

#include "biofuse/error.hpp"
#include "biofuse/simd/kernels.hpp"
#include "biofuse/tnn/triplet.hpp"

namespace biofuse::tnn {
namespace {

template <typename T>
double loss_impl(std::span<const T> fa, std::span<const T> fp, std::span<const T> fn, double margin) {
  if (fa.size() != fp.size() || fa.size() != fn.size())
    throw ShapeError("triplet_loss: embedding dimensions differ");
  const double d_ap = simd::squared_distance(fa, fp);
  const double d_an = simd::squared_distance(fa, fn);
  return std::max(d_ap - d_an + margin, 0.0);
}

template <typename T>
std::vector<double> to_double_rows(const std::vector<typename Network<T>::Cache>& caches) {
  std::vector<double> flat;
  for (const auto& c : caches) flat.insert(flat.end(), c.embedding.begin(), c.embedding.end());
  return flat;
}

}  // namespace

double triplet_loss(std::span<const double> fa, std::span<const double> fp, std::span<const double> fn,
                    double margin) {
  return loss_impl(fa, fp, fn, margin);
}

double triplet_loss(std::span<const float> fa, std::span<const float> fp, std::span<const float> fn,
                    double margin) {
  return loss_impl(fa, fp, fn, margin);
}

std::vector<Triplet> mine_triplets(std::span<const double> embeddings, std::size_t dim, std::span<const int> labels,
                                   double margin) {
  const std::size_t n = labels.size();
  if (dim == 0 || embeddings.size() != n * dim) throw ShapeError("mine_triplets: embedding matrix shape mismatch");
  if (std::set<int>(labels.begin(), labels.end()).size() < 2)
    throw MiningError("mine_triplets: batch must contain at least two subjects");

  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = simd::squared_distance(embeddings.subspan(i * dim, dim), embeddings.subspan(j * dim, dim));
      d[i * n + j] = d[j * n + i] = v;
    }

  std::vector<Triplet> out;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      const double d_ap = d[a * n + p];
      std::size_t semi = n, hardest = n;
      double semi_d = std::numeric_limits<double>::infinity();
      double hard_d = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < n; ++k) {
        if (labels[k] == labels[a]) continue;
        const double d_an = d[a * n + k];
        if (d_an < hard_d) {
          hard_d = d_an;
          hardest = k;
        }
        if (d_an > d_ap && d_an < d_ap + margin && d_an < semi_d) {
          semi_d = d_an;
          semi = k;
        }
      }
      out.push_back({a, p, semi < n ? semi : hardest});
    }
  }
  if (out.empty()) throw MiningError("mine_triplets: no subject has two samples in the batch");
  return out;
}

EmbeddingGradient triplet_embedding_gradient(std::span<const double> embeddings, std::size_t dim,
                                             std::span<const Triplet> triplets, double margin) {
  EmbeddingGradient g;
  g.d_emb.assign(embeddings.size(), 0.0);
  if (triplets.empty()) return g;
  const double scale = 1.0 / static_cast<double>(triplets.size());
  double total = 0;
  for (const Triplet& t : triplets) {
    const auto a = embeddings.subspan(t.anchor * dim, dim);
    const auto p = embeddings.subspan(t.positive * dim, dim);
    const auto q = embeddings.subspan(t.negative * dim, dim);
    const double l = triplet_loss(a, p, q, margin);
    total += l;
    if (l <= 0) continue;
    ++g.active;
    // dL/da = 2(n - p), dL/dp = 2(p - a), dL/dn = 2(a - n)
    double* ga = g.d_emb.data() + t.anchor * dim;
    double* gp = g.d_emb.data() + t.positive * dim;
    double* gn = g.d_emb.data() + t.negative * dim;
    for (std::size_t k = 0; k < dim; ++k) {
      ga[k] += scale * 2.0 * (q[k] - p[k]);
      gp[k] += scale * 2.0 * (p[k] - a[k]);
      gn[k] += scale * 2.0 * (a[k] - q[k]);
    }
  }
  g.mean_loss = total * scale;
  return g;
}

template <typename T>
BatchGradient<T> triplet_loss_gradient(const Network<T>& net, std::span<const T> weights,
                                       std::span<const std::vector<std::span<const T>>> inputs,
                                       std::span<const Triplet> triplets, double margin) {
  std::vector<typename Network<T>::Cache> caches(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) net.forward(weights, inputs[i], caches[i]);
  const auto dim = static_cast<std::size_t>(net.embedding_dim());
  const std::vector<double> flat = to_double_rows<T>(caches);
  const EmbeddingGradient eg = triplet_embedding_gradient(flat, dim, triplets, margin);

  BatchGradient<T> out;
  out.mean_loss = eg.mean_loss;
  out.active = eg.active;
  out.grad.assign(net.n_weights(), T(0));
  std::vector<T> de(dim);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    bool any = false;
    for (std::size_t k = 0; k < dim; ++k) {
      de[k] = static_cast<T>(eg.d_emb[i * dim + k]);
      any = any || de[k] != T(0);
    }
    if (any) net.backward(weights, caches[i], de, out.grad);
  }
  return out;
}

template <typename T>
double triplet_mean_loss(const Network<T>& net, std::span<const T> weights,
                         std::span<const std::vector<std::span<const T>>> inputs, std::span<const Triplet> triplets,
                         double margin) {
  std::vector<typename Network<T>::Cache> caches(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) net.forward(weights, inputs[i], caches[i]);
  const auto dim = static_cast<std::size_t>(net.embedding_dim());
  const std::vector<double> flat = to_double_rows<T>(caches);
  if (triplets.empty()) return 0.0;
  double total = 0;
  for (const Triplet& t : triplets)
    total += triplet_loss(std::span<const double>(flat).subspan(t.anchor * dim, dim),
                          std::span<const double>(flat).subspan(t.positive * dim, dim),
                          std::span<const double>(flat).subspan(t.negative * dim, dim), margin);
  return total / static_cast<double>(triplets.size());
}

template BatchGradient<float> triplet_loss_gradient(const Network<float>&, std::span<const float>,
                                                    std::span<const std::vector<std::span<const float>>>,
                                                    std::span<const Triplet>, double);
template BatchGradient<double> triplet_loss_gradient(const Network<double>&, std::span<const double>,
                                                     std::span<const std::vector<std::span<const double>>>,
                                                     std::span<const Triplet>, double);
template double triplet_mean_loss(const Network<float>&, std::span<const float>,
                                  std::span<const std::vector<std::span<const float>>>, std::span<const Triplet>,
                                  double);
template double triplet_mean_loss(const Network<double>&, std::span<const double>,
                                  std::span<const std::vector<std::span<const double>>>, std::span<const Triplet>,
                                  double);

}  // namespace biofuse::tnn
