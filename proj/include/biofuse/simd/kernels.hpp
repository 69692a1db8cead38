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
#include <string_view>

namespace biofuse::simd {

// Instruction sets a kernel table can be built for. Scalar is always
// available and is the reference every other variant is tested against.
enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

// One flat table of inner-loop kernels. All pointers are non-null.
struct KernelTable {
  Isa isa;

  float (*dot_f32)(const float* a, const float* b, std::size_t n);
  double (*dot_f64)(const double* a, const double* b, std::size_t n);

  // y += alpha * x
  void (*axpy_f32)(float alpha, const float* x, float* y, std::size_t n);
  void (*axpy_f64)(double alpha, const double* x, double* y, std::size_t n);

  // Squared Euclidean distance, accumulated in double for both input types.
  double (*sqdist_f32)(const float* a, const float* b, std::size_t n);
  double (*sqdist_f64)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_kernels();

bool cpu_supports(Isa isa);

// Table used by the rest of the library. Picked on first use: the best
// supported ISA, unless BIOFUSE_SIMD=scalar is set in the environment.
const KernelTable& active();

// Overrides the active table; throws ValidationError if unsupported.
void select(Isa isa);

// Typed front-ends over the active table.
inline float dot(std::span<const float> a, std::span<const float> b) {
  return active().dot_f32(a.data(), b.data(), a.size());
}
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot_f64(a.data(), b.data(), a.size());
}
inline void axpy(float alpha, std::span<const float> x, std::span<float> y) {
  active().axpy_f32(alpha, x.data(), y.data(), x.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy_f64(alpha, x.data(), y.data(), x.size());
}
inline double squared_distance(std::span<const float> a, std::span<const float> b) {
  return active().sqdist_f32(a.data(), b.data(), a.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().sqdist_f64(a.data(), b.data(), a.size());
}

}  // namespace biofuse::simd
