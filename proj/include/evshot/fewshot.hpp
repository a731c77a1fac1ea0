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

#include <cstdint>
#include <vector>

#include "evshot/adapter.hpp"
#include "evshot/fusion.hpp"
#include "evshot/manifest.hpp"

namespace evshot {

struct TrainConfig {
  std::size_t shots = 16;
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Stop after this many epochs without a validation improvement.
  std::size_t patience = 20;
  /// Validation samples drawn per class from the remaining training split;
  /// 0 means "same as shots". Falls back to the few-shot set when none remain.
  std::size_t val_per_class = 0;
  std::uint64_t seed = 0;

  std::size_t bottleneck = 0;  // 0 -> C / 4
  float residual_ratio = 0.2f;
  LifParams lif;
  float down_bound = 0.0f;
  bool detach_reset = false;

  FusionConfig fusion;  // empty alphas -> uniform over T
  unsigned workers = 1;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct FewShotResult {
  AdapterParams initial;
  AdapterParams params;  // best on validation
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
  std::vector<EpochLog> curve;  // entry 0 is the initialization
  std::vector<std::size_t> train_indices;  // into EmbeddingSet::samples
  std::vector<std::size_t> val_indices;
};

/// Converts a T x C embedding matrix to the adapter's matrix type and back.
Matrix<float> to_matrix(const EmbeddingMatrix& m);
EmbeddingMatrix to_embedding(const Matrix<float>& m);

/// p = softmax(logit_scale * sum_i alpha_i W_t adapter(F)_i)
Prediction classify_adapted(const EmbeddingMatrix& text, const EmbeddingMatrix& features,
                            const AdapterParams& params, const FusionConfig& cfg);

std::vector<Prediction> classify_adapted_batch(const EmbeddingMatrix& text, std::span<const EmbeddingMatrix> samples,
                                               const AdapterParams& params, const FusionConfig& cfg,
                                               unsigned workers = 1);

/// Draws `shots` samples per class from the training split with a seeded RNG
/// and fits the adapter to them by full-batch Adam on the cross-entropy of the
/// adapted, fused prediction. Text and visual embeddings stay fixed.
///
/// Throws InsufficientSamples when a class has fewer than `shots` training
/// samples, NonFiniteLoss if the loss diverges.
FewShotResult train_few_shot(const EmbeddingSet& set, const TrainConfig& cfg);

}  // namespace evshot
