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
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "evshot/cli/dataset.hpp"
#include "evshot/fewshot.hpp"
#include "evshot/projection.hpp"
#include "json.hpp"

namespace evshot::cli {

struct ProjectOptions {
  std::filesystem::path root;
  std::string kind = "csv";
  std::filesystem::path out;
  std::uint32_t timesteps = 4;
  std::string window = "equal-duration";
  std::string overwrite = "last-event-wins";
  std::uint32_t width = 0;   // csv only
  std::uint32_t height = 0;  // csv only
  double test_fraction = 0.1;
  bool aedat_on_bit_set = false;
  unsigned workers = 1;
};

/// "uniform", "grid", or a comma-separated weight list.
struct AlphaSpec {
  std::string text = "uniform";
};

struct ZeroShotOptions {
  std::filesystem::path manifest;
  std::string split = "test";  // "test", "train" or "all"
  AlphaSpec alpha;
  double logit_scale = kDefaultLogitScale;
  bool no_normalize = false;
  std::filesystem::path checkpoint;  // optional: classify through a trained adapter
  std::filesystem::path report;
  std::filesystem::path predictions;
  bool with_probabilities = false;
  unsigned workers = 1;
};

struct FewShotOptions {
  std::filesystem::path manifest;
  std::size_t shots = 16;
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  std::size_t patience = 20;
  std::size_t val_per_class = 0;
  std::uint64_t seed = 0;
  std::size_t bottleneck = 0;
  float residual_ratio = 0.2f;
  float leak = 0.5f;
  float threshold = 1.0f;
  float surrogate_width = 1.0f;
  std::string reset = "soft";
  bool detach_reset = false;
  float down_bound = 0.0f;
  AlphaSpec alpha;
  double logit_scale = kDefaultLogitScale;
  bool no_normalize = false;
  std::filesystem::path checkpoint = "adapter.ncad";
  std::filesystem::path report;
  unsigned workers = 1;
};

struct EvalOptions {
  std::filesystem::path manifest;
  std::filesystem::path predictions;
  std::filesystem::path report;
};

struct ReproduceOptions {
  std::filesystem::path nmnist;      // manifest with embeddings
  std::filesystem::path cifar10dvs;  // manifest with embeddings
  std::size_t shots = 16;
  std::uint64_t seed = 0;
  double tolerance = 5.0;  // percentage points
  std::filesystem::path report;
  unsigned workers = 1;
};

nlohmann::json cmd_project(const ProjectOptions& opts, std::ostream& log);
nlohmann::json cmd_zeroshot(const ZeroShotOptions& opts, std::ostream& log);
nlohmann::json cmd_fewshot(const FewShotOptions& opts, std::ostream& log);
nlohmann::json cmd_eval(const EvalOptions& opts, std::ostream& log);
nlohmann::json cmd_reproduce(const ReproduceOptions& opts, std::ostream& log);

/// Resolves an alpha specification against T; "grid" searches on
/// `search_samples`.
std::vector<double> resolve_alphas(const AlphaSpec& spec, std::size_t timesteps, const EmbeddingMatrix& text,
                                   std::span<const EmbeddingMatrix> search_samples,
                                   std::span<const std::uint32_t> search_labels, double logit_scale,
                                   unsigned workers);

/// Default prompt template the bridge should use for a dataset.
std::string default_prompt(std::string_view dataset);

}  // namespace evshot::cli
