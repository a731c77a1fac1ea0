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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "evshot/embedding.hpp"

namespace evshot {

inline constexpr double kDefaultLogitScale = 100.0;

struct FusionConfig {
  std::vector<double> alphas;  // one non-negative weight per timestep
  double logit_scale = kDefaultLogitScale;
  /// Row-normalize text and visual matrices inside classify_fused. The CLI
  /// normalizes at load time instead, so this defaults off.
  bool normalize = false;

  static FusionConfig uniform(std::size_t timesteps, double logit_scale = kDefaultLogitScale);

  /// Throws AllZeroWeights when no weight is positive, InvalidConfig for
  /// negative or non-finite weights or a non-positive scale.
  void validate() const;
};

struct Prediction {
  std::vector<double> probabilities;  // K, sums to 1
  std::vector<double> logits;         // K, after logit_scale
  std::size_t argmax = 0;
  std::size_t timesteps = 0;
  /// Unweighted per-timestep scores W_t f_vi, row-major T x K.
  std::vector<double> contributions;

  /// Class indices of the k largest probabilities, best first.
  std::vector<std::size_t> top_k(std::size_t k) const;
};

/// Which side of the weighted sum the text matrix is applied on. Both give the
/// same scores up to rounding.
enum class FusionOrder {
  PerTimestep,  // sum_i alpha_i (W_t f_vi)
  Pooled,       // W_t (sum_i alpha_i f_vi)
};

/// Softmax with max subtraction; argmax is the lowest index of the maximum.
Prediction softmax_prediction(std::vector<double> logits);

/// p = softmax(logit_scale * W_t f_v)
Prediction classify_single(const EmbeddingMatrix& text, std::span<const float> feature, double logit_scale);

/// p = softmax(logit_scale * sum_i alpha_i W_t f_vi)
Prediction classify_fused(const EmbeddingMatrix& text, const EmbeddingMatrix& features,
                          const FusionConfig& cfg, FusionOrder order = FusionOrder::PerTimestep);

struct Evaluation {
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  /// NaN for classes without samples.
  std::vector<double> per_class_accuracy;
};

Evaluation evaluate(std::span<const std::size_t> predicted, std::span<const std::uint32_t> labels,
                    std::size_t num_classes);
Evaluation evaluate(std::span<const Prediction> predictions, std::span<const std::uint32_t> labels);

/// Classifies many samples, `workers` threads at a time. Output order matches
/// input order and does not depend on the worker count.
std::vector<Prediction> classify_batch(const EmbeddingMatrix& text, std::span<const EmbeddingMatrix> samples,
                                       const FusionConfig& cfg, unsigned workers = 1);

/// Every weight vector on the simplex grid {0, step, 2*step, ..., 1}^T that
/// sums to 1, in lexicographic order.
std::vector<std::vector<double>> simplex_grid(std::size_t timesteps, double step);

struct AlphaSearchResult {
  std::vector<double> alphas;
  double accuracy = 0.0;
};

/// Picks the grid point with the best accuracy on the given samples; ties keep
/// the earliest grid point. Throws InvalidConfig for T > 4.
AlphaSearchResult grid_search_alphas(const EmbeddingMatrix& text, std::span<const EmbeddingMatrix> samples,
                                     std::span<const std::uint32_t> labels, double logit_scale,
                                     double step = 0.25, unsigned workers = 1);

}  // namespace evshot
