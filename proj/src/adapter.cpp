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

#include "evshot/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "binio.hpp"
#include "evshot/error.hpp"
#include "evshot/simd/kernels.hpp"

namespace evshot {

template <class Real>
void LifParamsT<Real>::validate() const {
  if (!(leak > Real(0) && leak <= Real(1))) throw Error(ErrorCode::InvalidConfig, "LIF leak must be in (0, 1]");
  if (!(threshold > Real(0)) || !std::isfinite(threshold)) {
    throw Error(ErrorCode::InvalidConfig, "LIF threshold must be positive");
  }
  if (!(surrogate_width > Real(0)) || !std::isfinite(surrogate_width)) {
    throw Error(ErrorCode::InvalidConfig, "surrogate width must be positive");
  }
  if (reset != ResetMode::Soft && reset != ResetMode::Hard) throw Error(ErrorCode::InvalidConfig, "unknown reset mode");
}

template <class Real>
LifStateT<Real> lif_step(const LifStateT<Real>& state, std::span<const Real> input, const LifParamsT<Real>& p) {
  const std::size_t n = state.membrane.size();
  if (input.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "LIF input has " + std::to_string(input.size()) + " units, state has " +
                                                  std::to_string(n));
  }
  LifStateT<Real> next = LifStateT<Real>::zeros(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(state.membrane[j]) || !std::isfinite(input[j])) {
      throw Error(ErrorCode::NonFiniteState, "non-finite membrane or input at unit " + std::to_string(j));
    }
    const Real v = p.leak * state.membrane[j] + input[j];
    const Real s = v >= p.threshold ? Real(1) : Real(0);
    next.membrane[j] = p.reset == ResetMode::Soft ? v - p.threshold * s : v * (Real(1) - s);
    next.last_spikes[j] = s;
  }
  return next;
}

template <class Real>
Matrix<Real>::Matrix(std::size_t r, std::size_t c, std::vector<Real> values) : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != rows * cols) {
    throw Error(ErrorCode::DimensionMismatch, "matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                                                  " given " + std::to_string(data.size()) + " values");
  }
}

template <class Real>
AdapterParamsT<Real> AdapterParamsT<Real>::zeros(std::size_t dim, std::size_t bottleneck) {
  AdapterParamsT p;
  p.dim = dim;
  p.bottleneck = bottleneck;
  p.w_down.assign(bottleneck * dim, Real(0));
  p.b_down.assign(bottleneck, Real(0));
  p.w_up.assign(dim * bottleneck, Real(0));
  p.b_up.assign(dim, Real(0));
  return p;
}

template <class Real>
void AdapterParamsT<Real>::validate() const {
  if (w_down.size() != bottleneck * dim || b_down.size() != bottleneck || w_up.size() != dim * bottleneck ||
      b_up.size() != dim) {
    throw Error(ErrorCode::DimensionMismatch, "adapter parameter shapes disagree with C=" + std::to_string(dim) +
                                                  ", H_b=" + std::to_string(bottleneck));
  }
  if (!(residual_ratio >= Real(0) && residual_ratio <= Real(1))) {
    throw Error(ErrorCode::InvalidConfig, "residual ratio must be in [0, 1]");
  }
  lif.validate();
  for (const auto* block : {&w_down, &b_down, &w_up, &b_up}) {
    for (Real v : *block) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "adapter parameters contain NaN/Inf");
    }
  }
}

template <class Real>
AdapterGradsT<Real>& AdapterGradsT<Real>::operator+=(const AdapterGradsT& other) {
  simd::axpy(Real(1), std::span<const Real>(other.w_down), std::span<Real>(w_down));
  simd::axpy(Real(1), std::span<const Real>(other.b_down), std::span<Real>(b_down));
  simd::axpy(Real(1), std::span<const Real>(other.w_up), std::span<Real>(w_up));
  simd::axpy(Real(1), std::span<const Real>(other.b_up), std::span<Real>(b_up));
  return *this;
}

namespace {

template <class Real>
Real relaxed_spike(Real v, const LifParamsT<Real>& lif) {
  return std::clamp((v - lif.threshold) / lif.surrogate_width + Real(0.5), Real(0), Real(1));
}

template <class Real>
Real surrogate_grad(Real v, const LifParamsT<Real>& lif) {
  return std::abs(v - lif.threshold) <= lif.surrogate_width / Real(2) ? Real(1) / lif.surrogate_width : Real(0);
}

template <class Real>
ForwardRecordT<Real> run_forward(const Matrix<Real>& features, const AdapterParamsT<Real>& params, SpikeMode mode) {
  params.validate();
  if (features.cols != params.dim) {
    throw Error(ErrorCode::DimensionMismatch, "features have C=" + std::to_string(features.cols) +
                                                  ", adapter expects C=" + std::to_string(params.dim));
  }
  const std::size_t T = features.rows;
  const std::size_t C = params.dim;
  const std::size_t H = params.bottleneck;
  const LifParamsT<Real>& lif = params.lif;
  const Real beta = params.residual_ratio;

  ForwardRecordT<Real> rec;
  rec.recorded = true;
  rec.mode = mode;
  rec.input = features;
  rec.pre_reset = Matrix<Real>(T, H);
  rec.spikes = Matrix<Real>(T, H);
  rec.output = Matrix<Real>(T, C);

  std::vector<Real> membrane(H, Real(0));
  std::vector<Real> current(H);
  for (std::size_t i = 0; i < T; ++i) {
    const auto f = features.row(i);
    simd::gemv(std::span<const Real>(params.w_down), H, C, f, std::span<Real>(current));
    auto v = rec.pre_reset.row(i);
    auto s = rec.spikes.row(i);
    for (std::size_t j = 0; j < H; ++j) {
      v[j] = lif.leak * membrane[j] + (current[j] + params.b_down[j]);
      if (!std::isfinite(v[j])) {
        throw Error(ErrorCode::NonFiniteState, "membrane diverged at timestep " + std::to_string(i));
      }
      s[j] = mode == SpikeMode::Hard ? (v[j] >= lif.threshold ? Real(1) : Real(0)) : relaxed_spike(v[j], lif);
      membrane[j] = lif.reset == ResetMode::Soft ? v[j] - lif.threshold * s[j] : v[j] * (Real(1) - s[j]);
    }
    auto out = rec.output.row(i);
    simd::gemv(std::span<const Real>(params.w_up), C, H, std::span<const Real>(s), out);
    for (std::size_t c = 0; c < C; ++c) {
      out[c] = (Real(1) - beta) * f[c] + beta * (out[c] + params.b_up[c]);
    }
  }
  return rec;
}

}  // namespace

template <class Real>
ForwardRecordT<Real> adapter_forward_recorded(const Matrix<Real>& features, const AdapterParamsT<Real>& params,
                                              SpikeMode mode) {
  return run_forward(features, params, mode);
}

template <class Real>
Matrix<Real> adapter_forward(const Matrix<Real>& features, const AdapterParamsT<Real>& params) {
  if (params.residual_ratio == Real(0)) {
    params.validate();
    if (features.cols != params.dim) {
      throw Error(ErrorCode::DimensionMismatch, "features have C=" + std::to_string(features.cols) +
                                                    ", adapter expects C=" + std::to_string(params.dim));
    }
    return features;
  }
  return std::move(run_forward(features, params, SpikeMode::Hard).output);
}

template <class Real>
Matrix<Real> adapter_forward_relaxed(const Matrix<Real>& features, const AdapterParamsT<Real>& params) {
  return std::move(run_forward(features, params, SpikeMode::Relaxed).output);
}

template <class Real>
AdapterGradsT<Real> adapter_backward(const ForwardRecordT<Real>& rec, const AdapterParamsT<Real>& params,
                                     const Matrix<Real>& upstream, const BackwardOptions& options) {
  const std::size_t C = params.dim;
  const std::size_t H = params.bottleneck;
  if (!rec.recorded || rec.input.cols != C || rec.pre_reset.cols != H || rec.spikes.cols != H ||
      rec.pre_reset.rows != rec.input.rows) {
    throw Error(ErrorCode::MissingForwardRecord, "backward needs the forward record of these parameters");
  }
  const std::size_t T = rec.input.rows;
  if (upstream.rows != T || upstream.cols != C) {
    throw Error(ErrorCode::DimensionMismatch, "upstream gradient must be " + std::to_string(T) + "x" +
                                                  std::to_string(C));
  }
  const LifParamsT<Real>& lif = params.lif;
  const Real beta = params.residual_ratio;
  auto grads = AdapterGradsT<Real>::zeros_like(params);

  std::vector<Real> d_out(C);
  std::vector<Real> d_spike(H);
  std::vector<Real> d_current(H);
  std::vector<Real> d_membrane(H, Real(0));  // dL/du_i flowing back from step i+1
  for (std::size_t step = T; step-- > 0;) {
    const auto g = upstream.row(step);
    const auto f = rec.input.row(step);
    const auto v = rec.pre_reset.row(step);
    const auto s = rec.spikes.row(step);

    for (std::size_t c = 0; c < C; ++c) d_out[c] = beta * g[c];
    simd::axpy(Real(1), std::span<const Real>(d_out), std::span<Real>(grads.b_up));
    simd::rank1_update(std::span<Real>(grads.w_up), C, H, std::span<const Real>(d_out), s);
    std::fill(d_spike.begin(), d_spike.end(), Real(0));
    simd::gemv_transposed_acc(std::span<const Real>(params.w_up), C, H, std::span<const Real>(d_out),
                              std::span<Real>(d_spike));

    for (std::size_t j = 0; j < H; ++j) {
      // u = v - theta*s (soft) or v*(1 - s) (hard)
      const Real du_dv = lif.reset == ResetMode::Soft ? Real(1) : Real(1) - s[j];
      const Real du_ds = options.detach_reset ? Real(0) : (lif.reset == ResetMode::Soft ? -lif.threshold : -v[j]);
      const Real ds_total = d_spike[j] + d_membrane[j] * du_ds;
      const Real dv = d_membrane[j] * du_dv + ds_total * surrogate_grad(v[j], lif);
      d_current[j] = dv;
      d_membrane[j] = lif.leak * dv;
    }
    simd::axpy(Real(1), std::span<const Real>(d_current), std::span<Real>(grads.b_down));
    simd::rank1_update(std::span<Real>(grads.w_down), H, C, std::span<const Real>(d_current), f);
  }
  return grads;
}

AdapterParams init_adapter(const AdapterInit& init) {
  if (init.dim == 0) throw Error(ErrorCode::InvalidConfig, "adapter dimension must be positive");
  const std::size_t H = init.bottleneck ? init.bottleneck : std::max<std::size_t>(1, init.dim / 4);
  AdapterParams p = AdapterParams::zeros(init.dim, H);
  p.residual_ratio = init.residual_ratio;
  p.lif = init.lif;
  const float down = init.down_bound > 0.0f ? init.down_bound : std::sqrt(3.0f) * init.lif.threshold;
  const float up = 1.0f / std::sqrt(static_cast<float>(H));

  std::mt19937_64 rng(init.seed);
  std::uniform_real_distribution<float> down_dist(-down, down);
  std::uniform_real_distribution<float> up_dist(-up, up);
  for (float& w : p.w_down) w = down_dist(rng);
  for (float& w : p.w_up) w = up_dist(rng);
  p.validate();
  return p;
}

std::vector<std::uint8_t> write_ncad(const AdapterParams& p) {
  p.validate();
  detail::ByteWriter w;
  w.magic("NCAD");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(p.dim));
  w.u32(static_cast<std::uint32_t>(p.bottleneck));
  w.f32(p.residual_ratio);
  w.f32(p.lif.leak);
  w.f32(p.lif.threshold);
  w.f32(p.lif.surrogate_width);
  w.u8(static_cast<std::uint8_t>(p.lif.reset));
  w.f32s(p.w_down);
  w.f32s(p.b_down);
  w.f32s(p.w_up);
  w.f32s(p.b_up);
  return std::move(w).take();
}

AdapterParams read_ncad(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, ErrorCode::DimensionMismatch, "NCAD");
  r.expect_magic("NCAD");
  const std::uint32_t version = r.u32();
  if (version != 1) throw Error(ErrorCode::ParseError, "NCAD: unsupported version " + std::to_string(version));
  const std::size_t C = r.u32();
  const std::size_t H = r.u32();
  AdapterParams p = AdapterParams::zeros(C, H);
  p.residual_ratio = r.f32();
  p.lif.leak = r.f32();
  p.lif.threshold = r.f32();
  p.lif.surrogate_width = r.f32();
  const std::uint8_t reset = r.u8();
  if (reset > 1) throw Error(ErrorCode::ParseError, "NCAD: unknown reset mode " + std::to_string(reset));
  p.lif.reset = static_cast<ResetMode>(reset);
  const std::size_t expected = (2 * C * H + H + C) * 4;
  if (r.remaining() != expected) {
    throw Error(ErrorCode::DimensionMismatch, "NCAD: expected " + std::to_string(expected) +
                                                  " parameter bytes, found " + std::to_string(r.remaining()));
  }
  for (auto* block : {&p.w_down, &p.b_down, &p.w_up, &p.b_up}) {
    for (float& v : *block) v = r.f32();
  }
  p.validate();
  return p;
}

#define EVSHOT_INSTANTIATE_ADAPTER(Real)                                                                    \
  template struct LifParamsT<Real>;                                                                         \
  template struct Matrix<Real>;                                                                             \
  template struct AdapterParamsT<Real>;                                                                     \
  template struct AdapterGradsT<Real>;                                                                      \
  template LifStateT<Real> lif_step(const LifStateT<Real>&, std::span<const Real>, const LifParamsT<Real>&); \
  template Matrix<Real> adapter_forward(const Matrix<Real>&, const AdapterParamsT<Real>&);                  \
  template Matrix<Real> adapter_forward_relaxed(const Matrix<Real>&, const AdapterParamsT<Real>&);          \
  template ForwardRecordT<Real> adapter_forward_recorded(const Matrix<Real>&, const AdapterParamsT<Real>&,   \
                                                         SpikeMode);                                        \
  template AdapterGradsT<Real> adapter_backward(const ForwardRecordT<Real>&, const AdapterParamsT<Real>&,    \
                                                const Matrix<Real>&, const BackwardOptions&);

EVSHOT_INSTANTIATE_ADAPTER(float)
EVSHOT_INSTANTIATE_ADAPTER(double)

#undef EVSHOT_INSTANTIATE_ADAPTER

}  // namespace evshot
