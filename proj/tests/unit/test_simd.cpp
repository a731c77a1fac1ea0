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

#include <random>
#include <vector>

#include "doctest.h"
#include "evshot/error.hpp"
#include "evshot/simd/kernels.hpp"

using namespace evshot;

namespace {

template <class Real>
std::vector<Real> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<Real> d(Real(-1), Real(1));
  std::vector<Real> v(n);
  for (Real& x : v) x = d(rng);
  return v;
}

std::vector<simd::Isa> supported_vector_isas() {
  std::vector<simd::Isa> out;
  for (simd::Isa isa : {simd::Isa::Avx2, simd::Isa::Neon}) {
    if (simd::isa_supported(isa)) out.push_back(isa);
  }
  return out;
}

// Sizes around every vector-width and unroll boundary.
const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 32, 33, 63, 64, 65, 127, 1024, 1031};

}  // namespace

TEST_CASE("scalar reference is always available and is the fallback") {
  CHECK(simd::isa_supported(simd::Isa::Scalar));
  simd::ScopedIsa scoped(simd::Isa::Scalar);
  CHECK(simd::active_isa() == simd::Isa::Scalar);
  const std::vector<float> a{1, 2, 3}, b{4, 5, 6};
  CHECK(simd::dot(std::span<const float>(a), std::span<const float>(b)) == 32.0f);
}

TEST_CASE("unsupported variants are rejected") {
  for (simd::Isa isa : {simd::Isa::Avx2, simd::Isa::Neon}) {
    if (!simd::isa_supported(isa)) CHECK_THROWS_AS(simd::set_active_isa(isa), Error);
  }
}

TEST_CASE("vector dot products match the scalar reference") {
  std::mt19937_64 rng(11);
  for (simd::Isa isa : supported_vector_isas()) {
    CAPTURE(simd::to_string(isa));
    for (std::size_t n : kSizes) {
      CAPTURE(n);
      const auto af = random_vec<float>(rng, n), bf = random_vec<float>(rng, n);
      const auto ad = random_vec<double>(rng, n), bd = random_vec<double>(rng, n);
      const float ref_f = simd::scalar::dot_f32(af.data(), bf.data(), n);
      const double ref_d = simd::scalar::dot_f64(ad.data(), bd.data(), n);
      float got_f = 0;
      double got_d = 0;
      {
        simd::ScopedIsa scoped(isa);
        got_f = simd::dot(std::span<const float>(af), std::span<const float>(bf));
        got_d = simd::dot(std::span<const double>(ad), std::span<const double>(bd));
      }
      // Only the summation order differs.
      CHECK(got_f == doctest::Approx(ref_f).epsilon(1e-5).scale(n + 1.0));
      CHECK(std::abs(got_d - ref_d) <= 1e-13 * (n + 1.0));
    }
  }
}

TEST_CASE("vector axpy matches the scalar reference exactly") {
  // axpy has no reduction, so every lane computes the same fused or unfused
  // product. Compare with a tolerance of one rounding step.
  std::mt19937_64 rng(12);
  for (simd::Isa isa : supported_vector_isas()) {
    for (std::size_t n : kSizes) {
      CAPTURE(n);
      const auto x = random_vec<float>(rng, n);
      auto y_ref = random_vec<float>(rng, n);
      auto y = y_ref;
      const auto xd = random_vec<double>(rng, n);
      auto yd_ref = random_vec<double>(rng, n);
      auto yd = yd_ref;
      simd::scalar::axpy_f32(0.37f, x.data(), y_ref.data(), n);
      simd::scalar::axpy_f64(-1.25, xd.data(), yd_ref.data(), n);
      {
        simd::ScopedIsa scoped(isa);
        simd::axpy(0.37f, std::span<const float>(x), std::span<float>(y));
        simd::axpy(-1.25, std::span<const double>(xd), std::span<double>(yd));
      }
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(y[i] == doctest::Approx(y_ref[i]).epsilon(1e-6));
        CHECK(yd[i] == doctest::Approx(yd_ref[i]).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("matrix helpers agree with a naive loop") {
  std::mt19937_64 rng(13);
  const std::size_t rows = 5, cols = 19;
  const auto m = random_vec<double>(rng, rows * cols);
  const auto x = random_vec<double>(rng, cols);
  const auto v = random_vec<double>(rng, rows);
  std::vector<double> y(rows);
  simd::gemv<double>(m, rows, cols, x, y);
  std::vector<double> yt(cols, 0.0);
  simd::gemv_transposed_acc<double>(m, rows, cols, v, yt);
  for (std::size_t r = 0; r < rows; ++r) {
    double ref = 0;
    for (std::size_t c = 0; c < cols; ++c) ref += m[r * cols + c] * x[c];
    CHECK(y[r] == doctest::Approx(ref).epsilon(1e-12));
  }
  for (std::size_t c = 0; c < cols; ++c) {
    double ref = 0;
    for (std::size_t r = 0; r < rows; ++r) ref += m[r * cols + c] * v[r];
    CHECK(yt[c] == doctest::Approx(ref).epsilon(1e-12));
  }
  auto m2 = m;
  simd::rank1_update<double>(m2, rows, cols, v, x);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      CHECK(m2[r * cols + c] == doctest::Approx(m[r * cols + c] + v[r] * x[c]).epsilon(1e-12));
    }
  }
}
