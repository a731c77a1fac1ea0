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

#include "evshot/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "evshot/error.hpp"
#include "evshot/simd/kernels.hpp"

namespace evshot {

Matrix<float> to_matrix(const EmbeddingMatrix& m) {
  return Matrix<float>(m.rows(), m.cols(), std::vector<float>(m.values().begin(), m.values().end()));
}

EmbeddingMatrix to_embedding(const Matrix<float>& m) {
  return EmbeddingMatrix(EmbeddingRole::Visual, m.rows, m.cols, m.data);
}

Prediction classify_adapted(const EmbeddingMatrix& text, const EmbeddingMatrix& features, const AdapterParams& params,
                            const FusionConfig& cfg) {
  return classify_fused(text, to_embedding(adapter_forward(to_matrix(features), params)), cfg);
}

std::vector<Prediction> classify_adapted_batch(const EmbeddingMatrix& text, std::span<const EmbeddingMatrix> samples,
                                               const AdapterParams& params, const FusionConfig& cfg,
                                               unsigned workers) {
  std::vector<Prediction> out(samples.size());
  workers = std::max(1u, workers);
  std::vector<std::exception_ptr> errors(workers);
  auto body = [&](unsigned w) {
    try {
      for (std::size_t i = w; i < samples.size(); i += workers) {
        out[i] = classify_adapted(text, samples[i], params, cfg);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    body(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body, w);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

namespace {

constexpr std::size_t kChunk = 8;

struct SampleLoss {
  double loss = 0.0;
  bool correct = false;
};

// Fused logits of an already adapted T x C sequence, before the softmax.
std::vector<double> fused_logits(const EmbeddingMatrix& text, const Matrix<float>& adapted, const FusionConfig& cfg) {
  std::vector<double> z(text.rows(), 0.0);
  for (std::size_t i = 0; i < adapted.rows; ++i) {
    for (std::size_t k = 0; k < text.rows(); ++k) z[k] += cfg.alphas[i] * simd::dot(text.row(k), adapted.row(i));
  }
  for (double& v : z) v *= cfg.logit_scale;
  return z;
}

double cross_entropy(const std::vector<double>& logits, std::size_t label) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  return m + std::log(sum) - logits[label];
}

SampleLoss sample_loss(const EmbeddingMatrix& text, const EmbeddedSample& s, const AdapterParams& params,
                       const FusionConfig& cfg) {
  const auto adapted = adapter_forward(to_matrix(s.features), params);
  const auto logits = fused_logits(text, adapted, cfg);
  const auto argmax = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  return {cross_entropy(logits, s.label), argmax == s.label};
}

// Loss and gradient of one sample, scaled by 1/batch.
double accumulate_sample(const EmbeddingMatrix& text, const EmbeddedSample& s, const AdapterParams& params,
                         const FusionConfig& cfg, const BackwardOptions& bopts, double inv_batch,
                         AdapterGrads& grads) {
  const auto rec = adapter_forward_recorded(to_matrix(s.features), params, SpikeMode::Hard);
  const auto logits = fused_logits(text, rec.output, cfg);
  const double loss = cross_entropy(logits, s.label);

  Prediction p = softmax_prediction(logits);
  std::vector<float> dz(text.rows());
  for (std::size_t k = 0; k < text.rows(); ++k) {
    const double target = k == s.label ? 1.0 : 0.0;
    dz[k] = static_cast<float>(cfg.logit_scale * (p.probabilities[k] - target) * inv_batch);
  }
  Matrix<float> upstream(rec.output.rows, rec.output.cols);
  for (std::size_t i = 0; i < upstream.rows; ++i) {
    auto g = upstream.row(i);
    for (std::size_t k = 0; k < text.rows(); ++k) {
      simd::axpy(static_cast<float>(cfg.alphas[i]) * dz[k], text.row(k), g);
    }
  }
  grads += adapter_backward(rec, params, upstream, bopts);
  return loss * inv_batch;
}

class Adam {
 public:
  Adam(const AdapterParams& p, const TrainConfig& cfg)
      : cfg_(cfg),
        m_(AdapterGrads::zeros_like(p)),
        v_(AdapterGrads::zeros_like(p)) {}

  void step(AdapterParams& p, const AdapterGrads& g) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t_));
    update(p.w_down, g.w_down, m_.w_down, v_.w_down, bc1, bc2);
    update(p.b_down, g.b_down, m_.b_down, v_.b_down, bc1, bc2);
    update(p.w_up, g.w_up, m_.w_up, v_.w_up, bc1, bc2);
    update(p.b_up, g.b_up, m_.b_up, v_.b_up, bc1, bc2);
  }

 private:
  void update(std::vector<float>& w, const std::vector<float>& g, std::vector<float>& m, std::vector<float>& v,
              double bc1, double bc2) const {
    const double b1 = cfg_.adam_beta1;
    const double b2 = cfg_.adam_beta2;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double mi = b1 * m[i] + (1.0 - b1) * g[i];
      const double vi = b2 * v[i] + (1.0 - b2) * double{g[i]} * g[i];
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      w[i] -= static_cast<float>(cfg_.learning_rate * (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.adam_epsilon));
    }
  }

  const TrainConfig& cfg_;
  AdapterGrads m_;
  AdapterGrads v_;
  std::uint64_t t_ = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

Split draw_few_shot(const EmbeddingSet& set, const TrainConfig& cfg) {
  const std::size_t K = set.num_classes();
  std::vector<std::vector<std::size_t>> by_class(K);
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    if (set.samples[i].split == "train") by_class[set.samples[i].label].push_back(i);
  }
  std::mt19937_64 rng(cfg.seed);
  const std::size_t val_n = cfg.val_per_class ? cfg.val_per_class : cfg.shots;
  Split split;
  for (std::size_t k = 0; k < K; ++k) {
    auto& pool = by_class[k];
    if (pool.size() < cfg.shots) {
      throw Error(ErrorCode::InsufficientSamples,
                  "class '" + set.classes[k] + "' has " + std::to_string(pool.size()) +
                      " training samples, " + std::to_string(cfg.shots) + " shots requested");
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    split.train.insert(split.train.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cfg.shots));
    const std::size_t take = std::min(val_n, pool.size() - cfg.shots);
    split.val.insert(split.val.end(), pool.begin() + static_cast<std::ptrdiff_t>(cfg.shots),
                     pool.begin() + static_cast<std::ptrdiff_t>(cfg.shots + take));
  }
  if (split.val.empty()) split.val = split.train;
  return split;
}

}  // namespace

FewShotResult train_few_shot(const EmbeddingSet& set, const TrainConfig& cfg_in) {
  if (cfg_in.shots == 0) throw Error(ErrorCode::InvalidConfig, "few-shot training needs shots >= 1");
  if (set.samples.empty()) throw Error(ErrorCode::InsufficientSamples, "embedding set has no samples");
  if (!(cfg_in.learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning rate must be positive");
  TrainConfig cfg = cfg_in;
  if (cfg.fusion.alphas.empty()) cfg.fusion = FusionConfig::uniform(set.timesteps(), cfg.fusion.logit_scale);
  cfg.fusion.validate();
  if (cfg.fusion.alphas.size() != set.timesteps()) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(cfg.fusion.alphas.size()) + " weights for T=" +
                                                  std::to_string(set.timesteps()));
  }

  const Split split = draw_few_shot(set, cfg);

  AdapterInit init;
  init.dim = set.dim();
  init.bottleneck = cfg.bottleneck;
  init.residual_ratio = cfg.residual_ratio;
  init.lif = cfg.lif;
  init.down_bound = cfg.down_bound;
  init.seed = cfg.seed;

  FewShotResult result;
  result.initial = init_adapter(init);
  result.train_indices = split.train;
  result.val_indices = split.val;

  AdapterParams params = result.initial;
  const BackwardOptions bopts{cfg.detach_reset};
  const double inv_batch = 1.0 / static_cast<double>(split.train.size());

  auto validate_params = [&](const AdapterParams& p) {
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t idx : split.val) {
      const SampleLoss sl = sample_loss(set.text, set.samples[idx], p, cfg.fusion);
      loss += sl.loss;
      correct += sl.correct ? 1 : 0;
    }
    const double n = static_cast<double>(split.val.size());
    return std::pair{loss / n, static_cast<double>(correct) / n};
  };

  auto [val_loss0, val_acc0] = validate_params(params);
  result.curve.push_back({0, std::nan(""), val_loss0, val_acc0});
  result.params = params;
  result.best_epoch = 0;
  result.best_val_accuracy = val_acc0;
  double best_val_loss = val_loss0;
  // Patience resets on a better model or on a new lowest validation loss, so
  // a flat accuracy with a still-falling loss does not end training.
  double lowest_val_loss = val_loss0;
  std::size_t since_improvement = 0;

  Adam adam(params, cfg);
  const std::size_t n_chunks = (split.train.size() + kChunk - 1) / kChunk;
  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(n_chunks)));

  auto diverged = [&](std::size_t epoch, const std::string& what) {
    return Error(ErrorCode::NonFiniteLoss, "training diverged at epoch " + std::to_string(epoch) + ": " + what +
                                               " (learning rate " + std::to_string(cfg.learning_rate) +
                                               ", best validation loss " + std::to_string(best_val_loss) + ")");
  };

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    try {
      std::vector<AdapterGrads> chunk_grads(n_chunks, AdapterGrads::zeros_like(params));
      std::vector<double> chunk_loss(n_chunks, 0.0);
      std::vector<std::exception_ptr> errors(workers);
      auto work = [&](unsigned w) {
        try {
          for (std::size_t c = w; c < n_chunks; c += workers) {
            const std::size_t end = std::min(split.train.size(), (c + 1) * kChunk);
            for (std::size_t k = c * kChunk; k < end; ++k) {
              chunk_loss[c] += accumulate_sample(set.text, set.samples[split.train[k]], params, cfg.fusion, bopts,
                                                 inv_batch, chunk_grads[c]);
            }
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      };
      if (workers == 1) {
        work(0);
      } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
      }
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }

      AdapterGrads grads = std::move(chunk_grads[0]);
      double loss = chunk_loss[0];
      for (std::size_t c = 1; c < n_chunks; ++c) {
        grads += chunk_grads[c];
        loss += chunk_loss[c];
      }
      if (!std::isfinite(loss)) throw diverged(epoch, "training loss is not finite");
      adam.step(params, grads);

      const auto [val_loss, val_acc] = validate_params(params);
      result.curve.push_back({epoch, loss, val_loss, val_acc});
      bool improved = false;
      if (val_acc > result.best_val_accuracy || (val_acc == result.best_val_accuracy && val_loss < best_val_loss)) {
        result.params = params;
        result.best_epoch = epoch;
        result.best_val_accuracy = val_acc;
        best_val_loss = val_loss;
        improved = true;
      }
      if (val_loss < lowest_val_loss) {
        lowest_val_loss = val_loss;
        improved = true;
      }
      if (improved) {
        since_improvement = 0;
      } else if (++since_improvement >= cfg.patience) {
        break;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteState && e.code() != ErrorCode::NonFiniteValue) throw;
      throw diverged(epoch, e.what());
    }
  }
  return result;
}

}  // namespace evshot
