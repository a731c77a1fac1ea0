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

#include "evshot/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <thread>

#include "evshot/error.hpp"
#include "evshot/simd/kernels.hpp"

namespace evshot {

FusionConfig FusionConfig::uniform(std::size_t timesteps, double logit_scale) {
  FusionConfig cfg;
  cfg.alphas.assign(timesteps, timesteps ? 1.0 / static_cast<double>(timesteps) : 0.0);
  cfg.logit_scale = logit_scale;
  return cfg;
}

void FusionConfig::validate() const {
  if (!(logit_scale > 0.0) || !std::isfinite(logit_scale)) {
    throw Error(ErrorCode::InvalidConfig, "logit_scale must be positive and finite");
  }
  bool any_positive = false;
  for (double a : alphas) {
    if (!std::isfinite(a) || a < 0.0) {
      throw Error(ErrorCode::InvalidConfig, "timestep weights must be finite and non-negative");
    }
    any_positive = any_positive || a > 0.0;
  }
  if (!any_positive) throw Error(ErrorCode::AllZeroWeights, "at least one timestep weight must be positive");
}

std::vector<std::size_t> Prediction::top_k(std::size_t k) const {
  std::vector<std::size_t> idx(probabilities.size());
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return probabilities[a] > probabilities[b] || (probabilities[a] == probabilities[b] && a < b);
                    });
  idx.resize(k);
  return idx;
}

Prediction softmax_prediction(std::vector<double> logits) {
  Prediction p;
  if (logits.empty()) return p;
  const auto max_it = std::max_element(logits.begin(), logits.end());
  p.argmax = static_cast<std::size_t>(max_it - logits.begin());
  const double max_logit = *max_it;
  p.probabilities.resize(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p.probabilities[k] = std::exp(logits[k] - max_logit);
    sum += p.probabilities[k];
  }
  for (double& v : p.probabilities) v /= sum;
  p.logits = std::move(logits);
  return p;
}

namespace {

void check_dims(const EmbeddingMatrix& text, std::size_t feature_dim) {
  if (text.cols() != feature_dim) {
    throw Error(ErrorCode::DimensionMismatch, "text embeddings have C=" + std::to_string(text.cols()) +
                                                  ", features have C=" + std::to_string(feature_dim));
  }
  if (text.rows() == 0) throw Error(ErrorCode::DimensionMismatch, "no classes in text embeddings");
}

std::vector<double> class_scores(const EmbeddingMatrix& text, std::span<const float> feature) {
  std::vector<double> scores(text.rows());
  for (std::size_t k = 0; k < text.rows(); ++k) scores[k] = simd::dot(text.row(k), feature);
  return scores;
}

}  // namespace

Prediction classify_single(const EmbeddingMatrix& text, std::span<const float> feature, double logit_scale) {
  check_dims(text, feature.size());
  if (!(logit_scale > 0.0)) throw Error(ErrorCode::InvalidConfig, "logit_scale must be positive");
  std::vector<double> scores = class_scores(text, feature);
  std::vector<double> contributions = scores;
  for (double& s : scores) s *= logit_scale;
  Prediction p = softmax_prediction(std::move(scores));
  p.timesteps = 1;
  p.contributions = std::move(contributions);
  return p;
}

Prediction classify_fused(const EmbeddingMatrix& text_in, const EmbeddingMatrix& features_in,
                          const FusionConfig& cfg, FusionOrder order) {
  cfg.validate();
  check_dims(text_in, features_in.cols());
  if (cfg.alphas.size() != features_in.rows()) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(cfg.alphas.size()) + " weights for " +
                                                  std::to_string(features_in.rows()) + " timesteps");
  }
  const EmbeddingMatrix text = cfg.normalize ? l2_normalize_rows(text_in) : text_in;
  const EmbeddingMatrix features = cfg.normalize ? l2_normalize_rows(features_in) : features_in;
  const std::size_t K = text.rows();
  const std::size_t T = features.rows();

  std::vector<double> contributions(T * K);
  for (std::size_t i = 0; i < T; ++i) {
    for (std::size_t k = 0; k < K; ++k) contributions[i * K + k] = simd::dot(text.row(k), features.row(i));
  }

  std::vector<double> fused(K, 0.0);
  if (order == FusionOrder::PerTimestep) {
    for (std::size_t i = 0; i < T; ++i) {
      for (std::size_t k = 0; k < K; ++k) fused[k] += cfg.alphas[i] * contributions[i * K + k];
    }
  } else {
    const std::size_t C = features.cols();
    std::vector<double> pooled(C, 0.0);
    std::vector<double> row(C);
    for (std::size_t i = 0; i < T; ++i) {
      std::copy(features.row(i).begin(), features.row(i).end(), row.begin());
      simd::axpy(cfg.alphas[i], std::span<const double>(row), std::span<double>(pooled));
    }
    for (std::size_t k = 0; k < K; ++k) {
      std::copy(text.row(k).begin(), text.row(k).end(), row.begin());
      fused[k] = simd::dot(std::span<const double>(row), std::span<const double>(pooled));
    }
  }
  for (double& z : fused) z *= cfg.logit_scale;

  Prediction p = softmax_prediction(std::move(fused));
  p.timesteps = T;
  p.contributions = std::move(contributions);
  return p;
}

Evaluation evaluate(std::span<const std::size_t> predicted, std::span<const std::uint32_t> labels,
                    std::size_t num_classes) {
  if (predicted.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predicted.size()) + " predictions for " +
                                               std::to_string(labels.size()) + " labels");
  }
  if (predicted.empty()) throw Error(ErrorCode::EmptyEvaluation, "accuracy is undefined for zero samples");
  Evaluation ev;
  ev.total = predicted.size();
  ev.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (labels[i] >= num_classes || predicted[i] >= num_classes) {
      throw Error(ErrorCode::DimensionMismatch, "class index out of range at sample " + std::to_string(i));
    }
    ++ev.confusion[labels[i]][predicted[i]];
    if (predicted[i] == labels[i]) ++ev.correct;
  }
  ev.accuracy = static_cast<double>(ev.correct) / static_cast<double>(ev.total);
  ev.per_class_accuracy.resize(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    const std::size_t n = std::accumulate(ev.confusion[k].begin(), ev.confusion[k].end(), std::size_t{0});
    ev.per_class_accuracy[k] = n ? static_cast<double>(ev.confusion[k][k]) / static_cast<double>(n)
                                 : std::numeric_limits<double>::quiet_NaN();
  }
  return ev;
}

Evaluation evaluate(std::span<const Prediction> predictions, std::span<const std::uint32_t> labels) {
  std::vector<std::size_t> predicted;
  predicted.reserve(predictions.size());
  for (const Prediction& p : predictions) predicted.push_back(p.argmax);
  const std::size_t K = predictions.empty() ? 0 : predictions.front().probabilities.size();
  return evaluate(predicted, labels, K);
}

namespace {

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) body(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::vector<Prediction> classify_batch(const EmbeddingMatrix& text, std::span<const EmbeddingMatrix> samples,
                                       const FusionConfig& cfg, unsigned workers) {
  cfg.validate();
  std::vector<Prediction> out(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) { out[i] = classify_fused(text, samples[i], cfg); });
  return out;
}

std::vector<std::vector<double>> simplex_grid(std::size_t timesteps, double step) {
  const int levels = static_cast<int>(std::lround(1.0 / step));
  std::vector<std::vector<double>> grid;
  std::vector<int> counts(timesteps, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int remaining) {
    if (i + 1 == timesteps) {
      counts[i] = remaining;
      std::vector<double> alphas(timesteps);
      for (std::size_t j = 0; j < timesteps; ++j) alphas[j] = counts[j] * step;
      grid.push_back(std::move(alphas));
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      counts[i] = c;
      rec(i + 1, remaining - c);
    }
  };
  if (timesteps > 0) rec(0, levels);
  return grid;
}

AlphaSearchResult grid_search_alphas(const EmbeddingMatrix& text, std::span<const EmbeddingMatrix> samples,
                                     std::span<const std::uint32_t> labels, double logit_scale, double step,
                                     unsigned workers) {
  if (samples.empty()) throw Error(ErrorCode::EmptyEvaluation, "grid search needs at least one sample");
  const std::size_t T = samples.front().rows();
  if (T > 4) throw Error(ErrorCode::InvalidConfig, "alpha grid search supports T <= 4, got " + std::to_string(T));
  AlphaSearchResult best;
  best.accuracy = -1.0;
  for (auto& alphas : simplex_grid(T, step)) {
    FusionConfig cfg;
    cfg.alphas = alphas;
    cfg.logit_scale = logit_scale;
    const auto preds = classify_batch(text, samples, cfg, workers);
    const double acc = evaluate(preds, labels).accuracy;
    if (acc > best.accuracy) best = {std::move(alphas), acc};
  }
  return best;
}

}  // namespace evshot
