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
#include <string>
#include <vector>

#include "evshot/embedding.hpp"

namespace evshot {

struct SampleRecord {
  std::string id;
  std::uint32_t label = 0;
  std::string split;   // "train" or "test"
  std::string frames;  // NCFS path, relative to the manifest directory
  std::string visual;  // NCEM path (T x C), relative to the manifest directory

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

/// JSON manifest shared by `project`, the encoder bridge and the classifier
/// commands. `project` fills `frames` and the expected `visual` locations; the
/// bridge writes the NCEM files those fields point to.
struct DatasetManifest {
  std::string dataset;
  std::vector<std::string> classes;
  std::uint32_t timesteps = 0;
  std::optional<std::uint32_t> dim;
  std::string text_embeddings;  // NCEM path (K x C)
  std::vector<SampleRecord> samples;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(std::string_view text);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// One labelled recording with its per-timestep visual features.
struct EmbeddedSample {
  std::string id;
  std::uint32_t label = 0;
  std::string split;
  EmbeddingMatrix features;  // T x C
};

/// Text embeddings plus every visual record of a manifest, validated to share
/// C and T.
struct EmbeddingSet {
  std::string dataset;
  std::vector<std::string> classes;
  EmbeddingMatrix text;  // K x C
  std::vector<EmbeddedSample> samples;

  std::size_t num_classes() const noexcept { return classes.size(); }
  std::size_t dim() const noexcept { return text.cols(); }
  std::size_t timesteps() const noexcept { return samples.empty() ? 0 : samples.front().features.rows(); }
};

/// Lists every referenced embedding file that does not exist yet.
std::vector<std::filesystem::path> missing_embeddings(const DatasetManifest& manifest,
                                                      const std::filesystem::path& base_dir);

/// Loads all embeddings referenced by `manifest` (paths relative to
/// `base_dir`). Throws MissingArtifact naming the first absent file,
/// DimensionMismatch when C or T disagree, and ParseError for labels >= K.
EmbeddingSet load_embedding_set(const DatasetManifest& manifest, const std::filesystem::path& base_dir,
                                bool normalize);

}  // namespace evshot
