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

#include <atomic>
#include <cstdlib>
#include <string>

#include "biofuse/error.hpp"
#include "biofuse/simd/kernels.hpp"

#if defined(BIOFUSE_HAVE_AVX2)
namespace biofuse::simd::avx2 {
const KernelTable& table();
}
#endif

namespace biofuse::simd {
namespace {

const KernelTable* pick_default() {
  if (const char* env = std::getenv("BIOFUSE_SIMD")) {
    if (std::string(env) == "scalar") return &scalar_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{pick_default()};
  return current;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(BIOFUSE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* avx2_kernels() {
#if defined(BIOFUSE_HAVE_AVX2)
  if (cpu_supports(Isa::Avx2)) return &avx2::table();
#endif
  return nullptr;
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void select(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      slot().store(&scalar_kernels(), std::memory_order_release);
      return;
    case Isa::Avx2:
      if (const KernelTable* t = avx2_kernels()) {
        slot().store(t, std::memory_order_release);
        return;
      }
      break;
  }
  throw ValidationError("SIMD variant '" + std::string(isa_name(isa)) +
                        "' is not available on this CPU/build");
}

}  // namespace biofuse::simd
