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

// Inter-timestep spiking adapter.
//
// A bottleneck C -> H_b -> C whose hidden layer is a population of leaky
// integrate-and-fire neurons. Rows of the per-timestep feature matrix are fed
// in order, so membrane potential carries information from earlier timesteps
// into later outputs:
//
//   h_i  = W_down f_i + b_down
//   v_i  = lambda * u_{i-1} + h_i              (pre-reset membrane)
//   s_i  = H(v_i - theta)                      (hard spikes)
//   u_i  = v_i - theta * s_i  |  v_i * (1 - s_i)   (soft | hard reset)
//   out_i = (1 - beta) f_i + beta (W_up s_i + b_up)
//
// Training uses BPTT with a boxcar surrogate dH/dv = 1/a on |v - theta| <= a/2.
// The relaxed forward replaces H with clip((v - theta)/a + 0.5, 0, 1), whose
// exact derivative is that same boxcar, which makes finite-difference checks of
// the backward pass possible.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace evshot {

enum class ResetMode : std::uint8_t { Soft = 0, Hard = 1 };
enum class SpikeMode { Hard, Relaxed };

template <class Real>
struct LifParamsT {
  Real leak = Real(0.5);       // lambda in (0, 1]
  Real threshold = Real(1.0);  // theta > 0
  Real surrogate_width = Real(1.0);  // a > 0
  ResetMode reset = ResetMode::Soft;

  void validate() const;

  friend bool operator==(const LifParamsT&, const LifParamsT&) = default;
};

template <class Real>
struct LifStateT {
  std::vector<Real> membrane;
  std::vector<Real> last_spikes;  // 0 or 1

  static LifStateT zeros(std::size_t n) { return {std::vector<Real>(n, Real(0)), std::vector<Real>(n, Real(0))}; }

  friend bool operator==(const LifStateT&, const LifStateT&) = default;
};

/// One hard-threshold LIF update. Throws NonFiniteState on NaN/Inf in the
/// state or input, DimensionMismatch on size disagreement.
template <class Real>
LifStateT<Real> lif_step(const LifStateT<Real>& state, std::span<const Real> input, const LifParamsT<Real>& p);

/// Dense row-major matrix used for feature sequences and their gradients.
template <class Real>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Real> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, Real(0)) {}
  Matrix(std::size_t r, std::size_t c, std::vector<Real> values);

  std::span<Real> row(std::size_t r) noexcept { return std::span(data).subspan(r * cols, cols); }
  std::span<const Real> row(std::size_t r) const noexcept { return std::span(data).subspan(r * cols, cols); }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

template <class Real>
struct AdapterParamsT {
  std::size_t dim = 0;         // C
  std::size_t bottleneck = 0;  // H_b
  std::vector<Real> w_down;    // H_b x C
  std::vector<Real> b_down;    // H_b
  std::vector<Real> w_up;      // C x H_b
  std::vector<Real> b_up;      // C
  Real residual_ratio = Real(0.2);  // beta in [0, 1]
  LifParamsT<Real> lif;

  static AdapterParamsT zeros(std::size_t dim, std::size_t bottleneck);

  /// Throws DimensionMismatch for inconsistent shapes, InvalidConfig for
  /// out-of-range beta or LIF constants.
  void validate() const;

  template <class Other>
  AdapterParamsT<Other> cast() const {
    AdapterParamsT<Other> out;
    out.dim = dim;
    out.bottleneck = bottleneck;
    out.w_down.assign(w_down.begin(), w_down.end());
    out.b_down.assign(b_down.begin(), b_down.end());
    out.w_up.assign(w_up.begin(), w_up.end());
    out.b_up.assign(b_up.begin(), b_up.end());
    out.residual_ratio = static_cast<Other>(residual_ratio);
    out.lif = {static_cast<Other>(lif.leak), static_cast<Other>(lif.threshold),
               static_cast<Other>(lif.surrogate_width), lif.reset};
    return out;
  }

  friend bool operator==(const AdapterParamsT&, const AdapterParamsT&) = default;
};

using LifParams = LifParamsT<float>;
using LifState = LifStateT<float>;
using AdapterParams = AdapterParamsT<float>;

template <class Real>
struct AdapterGradsT {
  std::vector<Real> w_down;
  std::vector<Real> b_down;
  std::vector<Real> w_up;
  std::vector<Real> b_up;

  static AdapterGradsT zeros_like(const AdapterParamsT<Real>& p) {
    return {std::vector<Real>(p.w_down.size(), Real(0)), std::vector<Real>(p.b_down.size(), Real(0)),
            std::vector<Real>(p.w_up.size(), Real(0)), std::vector<Real>(p.b_up.size(), Real(0))};
  }

  AdapterGradsT& operator+=(const AdapterGradsT& other);
};

using AdapterGrads = AdapterGradsT<float>;

/// Everything backward() needs from a forward pass.
template <class Real>
struct ForwardRecordT {
  bool recorded = false;
  SpikeMode mode = SpikeMode::Hard;
  Matrix<Real> input;      // T x C
  Matrix<Real> pre_reset;  // T x H_b, v_i
  Matrix<Real> spikes;     // T x H_b, s_i (continuous in relaxed mode)
  Matrix<Real> output;     // T x C
};

template <class Real>
Matrix<Real> adapter_forward(const Matrix<Real>& features, const AdapterParamsT<Real>& params);

template <class Real>
Matrix<Real> adapter_forward_relaxed(const Matrix<Real>& features, const AdapterParamsT<Real>& params);

template <class Real>
ForwardRecordT<Real> adapter_forward_recorded(const Matrix<Real>& features, const AdapterParamsT<Real>& params,
                                              SpikeMode mode);

struct BackwardOptions {
  /// Treat the reset term as a constant (no gradient through s in u = v - theta*s).
  bool detach_reset = false;
};

/// BPTT over i = T..1 given dL/d(out). Throws MissingForwardRecord when the
/// record is empty or was produced with different shapes.
template <class Real>
AdapterGradsT<Real> adapter_backward(const ForwardRecordT<Real>& record, const AdapterParamsT<Real>& params,
                                     const Matrix<Real>& upstream, const BackwardOptions& options = {});

struct AdapterInit {
  std::size_t dim = 0;
  std::size_t bottleneck = 0;  // 0 -> max(1, dim / 4)
  float residual_ratio = 0.2f;
  LifParams lif;
  /// Half-width of the uniform W_down init. 0 -> sqrt(3) * threshold, which
  /// gives pre-activations with standard deviation ~theta for unit-norm input
  /// rows. W_up uses the usual 1/sqrt(fan_in) bound. Biases start at zero.
  float down_bound = 0.0f;
  std::uint64_t seed = 0;
};

AdapterParams init_adapter(const AdapterInit& init);

/// NCAD checkpoint (little-endian): "NCAD", version u32 = 1, C u32, H_b u32,
/// beta f32, leak/threshold/surrogate width f32, reset u8, then W_down,
/// b_down, W_up, b_up as float32 blocks.
std::vector<std::uint8_t> write_ncad(const AdapterParams& params);
AdapterParams read_ncad(std::span<const std::uint8_t> bytes);

}  // namespace evshot
