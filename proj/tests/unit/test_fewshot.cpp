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

#include <set>

#include "doctest.h"
#include "evshot/error.hpp"
#include "evshot/fewshot.hpp"
#include "synthetic.hpp"

using namespace evshot;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

EmbeddingSet small_set() {
  testing::SyntheticSpec spec;
  spec.train_per_class = 12;
  spec.test_per_class = 5;
  return testing::make_synthetic_set(spec);
}

TrainConfig quick(std::size_t shots = 4, std::size_t epochs = 15) {
  TrainConfig cfg;
  cfg.shots = shots;
  cfg.epochs = epochs;
  cfg.learning_rate = 1e-2;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("few-shot sampling draws exactly `shots` training samples per class") {
  const EmbeddingSet set = small_set();
  const FewShotResult r = train_few_shot(set, quick(4, 1));
  std::vector<std::size_t> per_class(set.num_classes(), 0);
  for (std::size_t idx : r.train_indices) {
    CHECK(set.samples[idx].split == "train");
    ++per_class[set.samples[idx].label];
  }
  for (std::size_t n : per_class) CHECK(n == 4);
  const std::set<std::size_t> train(r.train_indices.begin(), r.train_indices.end());
  CHECK(train.size() == r.train_indices.size());
  CHECK(r.val_indices.size() == 16);
  for (std::size_t idx : r.val_indices) {
    CHECK(set.samples[idx].split == "train");
    CHECK(train.count(idx) == 0);
  }
}

TEST_CASE("training is deterministic and independent of the worker count") {
  const EmbeddingSet set = small_set();
  TrainConfig cfg = quick();
  const FewShotResult a = train_few_shot(set, cfg);
  const FewShotResult b = train_few_shot(set, cfg);
  CHECK(a.params == b.params);
  CHECK(a.train_indices == b.train_indices);
  cfg.workers = 3;
  const FewShotResult c = train_few_shot(set, cfg);
  CHECK(write_ncad(a.params) == write_ncad(c.params));
  REQUIRE(a.curve.size() == c.curve.size());
  for (std::size_t i = 1; i < a.curve.size(); ++i) CHECK(a.curve[i].train_loss == c.curve[i].train_loss);

  cfg.seed = 6;
  CHECK(train_few_shot(set, cfg).train_indices != a.train_indices);
}

TEST_CASE("zero epochs return the initialization") {
  const FewShotResult r = train_few_shot(small_set(), quick(4, 0));
  CHECK(r.params == r.initial);
  CHECK(r.best_epoch == 0);
  CHECK(r.curve.size() == 1);
}

TEST_CASE("the best validation model is kept") {
  const FewShotResult r = train_few_shot(small_set(), quick(4, 30));
  REQUIRE(r.best_epoch < r.curve.size());
  CHECK(r.curve[r.best_epoch].val_accuracy == r.best_val_accuracy);
  for (const EpochLog& e : r.curve) CHECK(e.val_accuracy <= r.best_val_accuracy);
}

TEST_CASE("configuration and data errors") {
  const EmbeddingSet set = small_set();
  CHECK(code_of([&] { train_few_shot(set, quick(13)); }) == ErrorCode::InsufficientSamples);
  CHECK(code_of([&] { train_few_shot(set, quick(0)); }) == ErrorCode::InvalidConfig);
  TrainConfig cfg = quick();
  cfg.learning_rate = 0.0;
  CHECK(code_of([&] { train_few_shot(set, cfg); }) == ErrorCode::InvalidConfig);
  cfg = quick();
  cfg.fusion.alphas = {1.0};
  CHECK(code_of([&] { train_few_shot(set, cfg); }) == ErrorCode::DimensionMismatch);
  cfg = quick(4, 50);
  cfg.learning_rate = 1e300;
  CHECK(code_of([&] { train_few_shot(set, cfg); }) == ErrorCode::NonFiniteLoss);
}

TEST_CASE("an adapter with zero residual ratio reproduces zero-shot predictions") {
  const EmbeddingSet set = small_set();
  AdapterInit init;
  init.dim = set.dim();
  init.residual_ratio = 0.0f;
  const AdapterParams p = init_adapter(init);
  const FusionConfig cfg = FusionConfig::uniform(set.timesteps());
  for (const EmbeddedSample& s : set.samples) {
    const Prediction a = classify_adapted(set.text, s.features, p, cfg);
    const Prediction b = classify_fused(set.text, s.features, cfg);
    CHECK(a.probabilities == b.probabilities);
    CHECK(a.argmax == b.argmax);
  }
}

TEST_CASE("training improves on the zero-shot baseline") {
  testing::SyntheticSpec spec;
  const EmbeddingSet set = testing::make_synthetic_set(spec);
  std::vector<EmbeddingMatrix> test;
  std::vector<std::uint32_t> labels;
  for (const auto& s : set.samples) {
    if (s.split == "test") {
      test.push_back(s.features);
      labels.push_back(s.label);
    }
  }
  const FusionConfig cfg = FusionConfig::uniform(set.timesteps());
  TrainConfig tc;
  tc.fusion = cfg;
  const FewShotResult r = train_few_shot(set, tc);
  const double before = evaluate(classify_batch(set.text, test, cfg), labels).accuracy;
  const double after = evaluate(classify_adapted_batch(set.text, test, r.params, cfg), labels).accuracy;
  CHECK(after >= before);
}
