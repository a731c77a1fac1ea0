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

#pragma once

// Dense float kernels used by the fusion and adapter math.
//
// Every kernel has a scalar reference implementation in `scalar::`. Vector
// variants (`avx2::`, `neon::`) are compiled when the target supports them and
// are selected once at startup from the CPU feature bits. Results of the vector
// variants differ from the reference only by summation order.

#include <cstddef>
#include <span>
#include <string_view>

namespace evshot::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa) noexcept;

/// True when the variant was compiled in and the running CPU supports it.
bool isa_supported(Isa isa) noexcept;

/// Widest supported variant.
Isa best_isa() noexcept;

Isa active_isa() noexcept;

/// Switch the process-wide kernel table. Throws InvalidConfig when `isa` is
/// not supported. Meant for tests and benchmarking; not thread-safe with
/// respect to concurrent kernel calls that expect a particular variant.
void set_active_isa(Isa isa);

/// Restores the previous variant on destruction.
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa) : previous_(active_isa()) { set_active_isa(isa); }
  ~ScopedIsa() { set_active_isa(previous_); }
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa previous_;
};

namespace scalar {
float dot_f32(const float* a, const float* b, std::size_t n) noexcept;
double dot_f64(const double* a, const double* b, std::size_t n) noexcept;
void axpy_f32(float alpha, const float* x, float* y, std::size_t n) noexcept;
void axpy_f64(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace scalar

#if defined(EVSHOT_HAVE_AVX2)
namespace avx2 {
float dot_f32(const float* a, const float* b, std::size_t n) noexcept;
double dot_f64(const double* a, const double* b, std::size_t n) noexcept;
void axpy_f32(float alpha, const float* x, float* y, std::size_t n) noexcept;
void axpy_f64(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace avx2
#endif

#if defined(EVSHOT_HAVE_NEON)
namespace neon {
float dot_f32(const float* a, const float* b, std::size_t n) noexcept;
double dot_f64(const double* a, const double* b, std::size_t n) noexcept;
void axpy_f32(float alpha, const float* x, float* y, std::size_t n) noexcept;
void axpy_f64(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace neon
#endif

// Dispatched entry points. Lengths must agree; callers validate shapes.
float dot(std::span<const float> a, std::span<const float> b) noexcept;
double dot(std::span<const double> a, std::span<const double> b) noexcept;

/// y += alpha * x
void axpy(float alpha, std::span<const float> x, std::span<float> y) noexcept;
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;

/// y = M x for a row-major rows x cols matrix.
template <class Real>
void gemv(std::span<const Real> matrix, std::size_t rows, std::size_t cols,
          std::span<const Real> x, std::span<Real> y) noexcept {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = dot(matrix.subspan(r * cols, cols), x);
  }
}

/// y += M^T v for a row-major rows x cols matrix.
template <class Real>
void gemv_transposed_acc(std::span<const Real> matrix, std::size_t rows, std::size_t cols,
                         std::span<const Real> v, std::span<Real> y) noexcept {
  for (std::size_t r = 0; r < rows; ++r) {
    if (v[r] != Real(0)) axpy(v[r], matrix.subspan(r * cols, cols), y);
  }
}

/// M += u x^T
template <class Real>
void rank1_update(std::span<Real> matrix, std::size_t rows, std::size_t cols,
                  std::span<const Real> u, std::span<const Real> x) noexcept {
  for (std::size_t r = 0; r < rows; ++r) {
    if (u[r] != Real(0)) axpy(u[r], x, matrix.subspan(r * cols, cols));
  }
}

}  // namespace evshot::simd
