// Copyright 2026 The evshot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <atomic>

#include "evshot/error.hpp"
#include "evshot/simd/kernels.hpp"

namespace evshot::simd {

namespace {

struct KernelTable {
  Isa isa;
  float (*dot_f32)(const float*, const float*, std::size_t) noexcept;
  double (*dot_f64)(const double*, const double*, std::size_t) noexcept;
  void (*axpy_f32)(float, const float*, float*, std::size_t) noexcept;
  void (*axpy_f64)(double, const double*, double*, std::size_t) noexcept;
};

constexpr KernelTable kScalarTable{Isa::Scalar, scalar::dot_f32, scalar::dot_f64,
                                   scalar::axpy_f32, scalar::axpy_f64};
#if defined(EVSHOT_HAVE_AVX2)
constexpr KernelTable kAvx2Table{Isa::Avx2, avx2::dot_f32, avx2::dot_f64, avx2::axpy_f32,
                                 avx2::axpy_f64};
#endif
#if defined(EVSHOT_HAVE_NEON)
constexpr KernelTable kNeonTable{Isa::Neon, neon::dot_f32, neon::dot_f64, neon::axpy_f32,
                                 neon::axpy_f64};
#endif

const KernelTable* table_for(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return &kScalarTable;
#if defined(EVSHOT_HAVE_AVX2)
    case Isa::Avx2: return &kAvx2Table;
#endif
#if defined(EVSHOT_HAVE_NEON)
    case Isa::Neon: return &kNeonTable;
#endif
    default: return nullptr;
  }
}

std::atomic<const KernelTable*>& active_table() noexcept {
  static std::atomic<const KernelTable*> table{table_for(best_isa())};
  return table;
}

}  // namespace

std::string_view to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool isa_supported(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(EVSHOT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(EVSHOT_HAVE_NEON)
      return true;  // mandatory on AArch64
#else
      return false;
#endif
  }
  return false;
}

Isa best_isa() noexcept {
  if (isa_supported(Isa::Avx2)) return Isa::Avx2;
  if (isa_supported(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

Isa active_isa() noexcept { return active_table().load(std::memory_order_relaxed)->isa; }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw Error(ErrorCode::InvalidConfig,
                "kernel variant '" + std::string(to_string(isa)) + "' is not available");
  }
  active_table().store(table_for(isa), std::memory_order_relaxed);
}

float dot(std::span<const float> a, std::span<const float> b) noexcept {
  return active_table().load(std::memory_order_relaxed)->dot_f32(a.data(), b.data(), a.size());
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return active_table().load(std::memory_order_relaxed)->dot_f64(a.data(), b.data(), a.size());
}

void axpy(float alpha, std::span<const float> x, std::span<float> y) noexcept {
  active_table().load(std::memory_order_relaxed)->axpy_f32(alpha, x.data(), y.data(), x.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  active_table().load(std::memory_order_relaxed)->axpy_f64(alpha, x.data(), y.data(), x.size());
}

}  // namespace evshot::simd
