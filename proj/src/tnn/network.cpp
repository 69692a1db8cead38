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
#include <random>

#include "biofuse/error.hpp"
#include "biofuse/simd/kernels.hpp"
#include "biofuse/tnn/network.hpp"

namespace biofuse::tnn {
namespace {

// Added under the square root of the embedding norm so an all-zero
// pre-embedding does not divide by zero.
constexpr double kNormEps = 1e-12;

}  // namespace

template <typename T>
Network<T>::Network(ArchSpec arch) : arch_(std::move(arch)) {
  arch_.validate();
  std::size_t off = 0;
  int concat = 0;
  for (const auto& b : arch_.branches) {
    std::vector<Op> ops;
    int c = 0, l = 0;
    off = plan(b.layers, b.channels, b.length, off, ops, c, l);
    branch_ops_.push_back(std::move(ops));
    branch_out_.push_back(c * l);
    concat += c * l;
  }
  int c = 0, l = 0;
  off = plan(arch_.head, concat, 1, off, head_ops_, c, l);
  n_weights_ = off;
  embedding_dim_ = c * l;
}

template <typename T>
std::size_t Network<T>::input_size(std::size_t branch) const {
  const auto& b = arch_.branches.at(branch);
  return static_cast<std::size_t>(b.channels) * b.length;
}

template <typename T>
std::size_t Network<T>::plan(const std::vector<LayerSpec>& layers, int c, int l, std::size_t off,
                             std::vector<Op>& ops, int& out_c, int& out_l) {
  for (const auto& ly : layers) {
    Op op{ly.kind, c, l, c, l, ly.width, ly.stride, 0, 0};
    switch (ly.kind) {
      case LayerKind::Conv1d:
        op.out_c = ly.filters;
        op.out_l = (l - ly.width) / ly.stride + 1;
        op.w_off = off;
        off += static_cast<std::size_t>(ly.filters) * c * ly.width;
        op.b_off = off;
        off += ly.filters;
        break;
      case LayerKind::Relu:
        break;
      case LayerKind::MaxPool:
        op.out_l = l / ly.width;
        break;
      case LayerKind::Dense:
        op.out_c = ly.width;
        op.out_l = 1;
        op.w_off = off;
        off += static_cast<std::size_t>(ly.width) * c * l;
        op.b_off = off;
        off += ly.width;
        break;
    }
    if ((ly.kind != LayerKind::Relu && ly.width < 1) || ly.stride < 1 ||
        (ly.kind == LayerKind::Conv1d && (ly.filters < 1 || l < ly.width)) || op.out_l < 1 || op.out_c < 1)
      throw ValidationError("arch " + arch_.tag() + ": layer does not fit its " + std::to_string(c) + " x " +
                            std::to_string(l) + " input");
    ops.push_back(op);
    c = op.out_c;
    l = op.out_l;
  }
  out_c = c;
  out_l = l;
  return off;
}

template <typename T>
void Network<T>::run_forward(const std::vector<Op>& ops, std::span<const T> w, std::vector<std::vector<T>>& acts,
                             std::vector<std::vector<std::uint32_t>>& argmax) const {
  acts.resize(ops.size() + 1);
  argmax.resize(ops.size());
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const Op& op = ops[i];
    const std::vector<T>& in = acts[i];
    std::vector<T>& out = acts[i + 1];
    out.assign(static_cast<std::size_t>(op.out_c) * op.out_l, T(0));
    switch (op.kind) {
      case LayerKind::Conv1d: {
        const T* W = w.data() + op.w_off;
        const T* B = w.data() + op.b_off;
        for (int f = 0; f < op.out_c; ++f) {
          T* o = out.data() + static_cast<std::size_t>(f) * op.out_l;
          std::fill_n(o, op.out_l, B[f]);
          for (int c = 0; c < op.in_c; ++c) {
            const T* x = in.data() + static_cast<std::size_t>(c) * op.in_l;
            const T* wk = W + (static_cast<std::size_t>(f) * op.in_c + c) * op.width;
            if (op.stride == 1) {
              for (int k = 0; k < op.width; ++k)
                simd::axpy(wk[k], std::span<const T>(x + k, op.out_l), std::span<T>(o, op.out_l));
            } else {
              for (int t = 0; t < op.out_l; ++t) {
                T s = 0;
                for (int k = 0; k < op.width; ++k) s += wk[k] * x[t * op.stride + k];
                o[t] += s;
              }
            }
          }
        }
        break;
      }
      case LayerKind::Relu:
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = in[k] > T(0) ? in[k] : T(0);
        break;
      case LayerKind::MaxPool: {
        auto& am = argmax[i];
        am.assign(out.size(), 0);
        for (int c = 0; c < op.in_c; ++c) {
          const T* x = in.data() + static_cast<std::size_t>(c) * op.in_l;
          for (int j = 0; j < op.out_l; ++j) {
            int best = j * op.width;
            for (int k = 1; k < op.width; ++k)
              if (x[j * op.width + k] > x[best]) best = j * op.width + k;
            const std::size_t o = static_cast<std::size_t>(c) * op.out_l + j;
            out[o] = x[best];
            am[o] = static_cast<std::uint32_t>(static_cast<std::size_t>(c) * op.in_l + best);
          }
        }
        break;
      }
      case LayerKind::Dense: {
        const std::size_t n_in = in.size();
        const T* W = w.data() + op.w_off;
        const T* B = w.data() + op.b_off;
        for (int u = 0; u < op.out_c; ++u)
          out[u] = B[u] + simd::dot(std::span<const T>(W + u * n_in, n_in), std::span<const T>(in));
        break;
      }
    }
  }
}

template <typename T>
void Network<T>::forward(std::span<const T> weights, std::span<const std::span<const T>> inputs,
                         Cache& cache) const {
  if (weights.size() != n_weights_)
    throw ShapeError("network " + arch_.tag() + ": expected " + std::to_string(n_weights_) + " weights, got " +
                     std::to_string(weights.size()));
  if (inputs.size() != arch_.branches.size())
    throw ShapeError("network " + arch_.tag() + ": expected " + std::to_string(arch_.branches.size()) +
                     " input(s), got " + std::to_string(inputs.size()));
  cache.branch_acts.resize(branch_ops_.size());
  cache.branch_argmax.resize(branch_ops_.size());
  cache.head_acts.resize(head_ops_.size() + 1);
  auto& concat = cache.head_acts[0];
  concat.clear();
  for (std::size_t b = 0; b < branch_ops_.size(); ++b) {
    if (inputs[b].size() != input_size(b))
      throw ShapeError("network " + arch_.tag() + ": branch " + std::to_string(b) + " expects " +
                       std::to_string(input_size(b)) + " values, got " + std::to_string(inputs[b].size()));
    auto& acts = cache.branch_acts[b];
    acts.resize(branch_ops_[b].size() + 1);
    acts[0].assign(inputs[b].begin(), inputs[b].end());
    run_forward(branch_ops_[b], weights, acts, cache.branch_argmax[b]);
    concat.insert(concat.end(), acts.back().begin(), acts.back().end());
  }
  run_forward(head_ops_, weights, cache.head_acts, cache.head_argmax);
  const auto& z = cache.head_acts.back();
  T ss = 0;
  for (T v : z) ss += v * v;
  cache.norm = std::sqrt(ss + T(kNormEps));
  cache.embedding.resize(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) cache.embedding[k] = z[k] / cache.norm;
}

template <typename T>
void Network<T>::run_backward(const std::vector<Op>& ops, std::span<const T> w,
                              const std::vector<std::vector<T>>& acts,
                              const std::vector<std::vector<std::uint32_t>>& argmax, std::vector<T> d_out,
                              std::span<T> grad, std::vector<T>* d_in) const {
  for (std::size_t ii = ops.size(); ii-- > 0;) {
    const Op& op = ops[ii];
    const std::vector<T>& in = acts[ii];
    std::vector<T> d_prev(in.size(), T(0));
    // The first layer of a branch needs no input gradient.
    const bool need_input_grad = ii > 0 || d_in != nullptr;
    switch (op.kind) {
      case LayerKind::Conv1d: {
        const T* W = w.data() + op.w_off;
        T* dW = grad.data() + op.w_off;
        T* dB = grad.data() + op.b_off;
        for (int f = 0; f < op.out_c; ++f) {
          const T* g = d_out.data() + static_cast<std::size_t>(f) * op.out_l;
          T gs = 0;
          for (int t = 0; t < op.out_l; ++t) gs += g[t];
          dB[f] += gs;
          for (int c = 0; c < op.in_c; ++c) {
            const T* x = in.data() + static_cast<std::size_t>(c) * op.in_l;
            T* dx = d_prev.data() + static_cast<std::size_t>(c) * op.in_l;
            const std::size_t wbase = (static_cast<std::size_t>(f) * op.in_c + c) * op.width;
            if (op.stride == 1) {
              const std::span<const T> gspan(g, op.out_l);
              for (int k = 0; k < op.width; ++k) {
                dW[wbase + k] += simd::dot(gspan, std::span<const T>(x + k, op.out_l));
                if (need_input_grad) simd::axpy(W[wbase + k], gspan, std::span<T>(dx + k, op.out_l));
              }
            } else {
              for (int t = 0; t < op.out_l; ++t)
                for (int k = 0; k < op.width; ++k) {
                  dW[wbase + k] += g[t] * x[t * op.stride + k];
                  if (need_input_grad) dx[t * op.stride + k] += W[wbase + k] * g[t];
                }
            }
          }
        }
        break;
      }
      case LayerKind::Relu: {
        const std::vector<T>& out = acts[ii + 1];
        for (std::size_t k = 0; k < d_prev.size(); ++k) d_prev[k] = out[k] > T(0) ? d_out[k] : T(0);
        break;
      }
      case LayerKind::MaxPool: {
        const auto& am = argmax[ii];
        for (std::size_t k = 0; k < d_out.size(); ++k) d_prev[am[k]] += d_out[k];
        break;
      }
      case LayerKind::Dense: {
        const std::size_t n_in = in.size();
        const T* W = w.data() + op.w_off;
        T* dW = grad.data() + op.w_off;
        T* dB = grad.data() + op.b_off;
        for (int u = 0; u < op.out_c; ++u) {
          const T g = d_out[u];
          if (g == T(0)) continue;
          dB[u] += g;
          simd::axpy(g, std::span<const T>(in), std::span<T>(dW + u * n_in, n_in));
          if (need_input_grad) simd::axpy(g, std::span<const T>(W + u * n_in, n_in), std::span<T>(d_prev));
        }
        break;
      }
    }
    d_out = std::move(d_prev);
  }
  if (d_in) *d_in = std::move(d_out);
}

template <typename T>
void Network<T>::backward(std::span<const T> weights, const Cache& cache, std::span<const T> d_embedding,
                          std::span<T> grad) const {
  if (grad.size() != n_weights_ || weights.size() != n_weights_)
    throw ShapeError("network " + arch_.tag() + ": weight/gradient size mismatch");
  if (d_embedding.size() != cache.embedding.size())
    throw ShapeError("network " + arch_.tag() + ": embedding gradient size mismatch");
  // Through e = z / sqrt(|z|^2 + eps): dz = (de - e (e . de)) / n.
  const auto& e = cache.embedding;
  T proj = 0;
  for (std::size_t k = 0; k < e.size(); ++k) proj += e[k] * d_embedding[k];
  std::vector<T> dz(e.size());
  for (std::size_t k = 0; k < e.size(); ++k) dz[k] = (d_embedding[k] - e[k] * proj) / cache.norm;

  std::vector<T> d_concat;
  run_backward(head_ops_, weights, cache.head_acts, cache.head_argmax, std::move(dz), grad, &d_concat);
  std::size_t off = 0;
  for (std::size_t b = 0; b < branch_ops_.size(); ++b) {
    const auto n = static_cast<std::size_t>(branch_out_[b]);
    std::vector<T> d_branch(d_concat.begin() + static_cast<std::ptrdiff_t>(off),
                            d_concat.begin() + static_cast<std::ptrdiff_t>(off + n));
    run_backward(branch_ops_[b], weights, cache.branch_acts[b], cache.branch_argmax[b], std::move(d_branch), grad,
                 nullptr);
    off += n;
  }
}

template <typename T>
void Network<T>::init_weights(std::span<T> weights, std::uint64_t seed) const {
  if (weights.size() != n_weights_) throw ShapeError("init_weights: size mismatch");
  std::mt19937_64 rng(seed);
  std::fill(weights.begin(), weights.end(), T(0));
  auto fill = [&](const std::vector<Op>& ops) {
    for (const Op& op : ops) {
      std::size_t fan_in = 0, count = 0;
      if (op.kind == LayerKind::Conv1d) {
        fan_in = static_cast<std::size_t>(op.in_c) * op.width;
        count = fan_in * op.out_c;
      } else if (op.kind == LayerKind::Dense) {
        fan_in = static_cast<std::size_t>(op.in_c) * op.in_l;
        count = fan_in * op.out_c;
      } else {
        continue;
      }
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (std::size_t k = 0; k < count; ++k) weights[op.w_off + k] = static_cast<T>(u(rng));
    }
  };
  for (const auto& ops : branch_ops_) fill(ops);
  fill(head_ops_);
}

template class Network<float>;
template class Network<double>;

}  // namespace biofuse::tnn
