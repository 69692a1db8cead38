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

#include "biofuse/simd/kernels.hpp"

namespace biofuse::simd {
namespace {

template <typename T, typename Acc>
Acc dot_ref(const T* a, const T* b, std::size_t n) {
  Acc s = 0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<Acc>(a[i]) * static_cast<Acc>(b[i]);
  return s;
}

template <typename T>
void axpy_ref(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
double sqdist_ref(const T* a, const T* b, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      Isa::Scalar,
      &dot_ref<float, float>,
      &dot_ref<double, double>,
      &axpy_ref<float>,
      &axpy_ref<double>,
      &sqdist_ref<float>,
      &sqdist_ref<double>,
  };
  return table;
}

}  // namespace biofuse::simd
