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

#include "evshot/manifest.hpp"

#include <fstream>
#include <sstream>

#include "evshot/error.hpp"
#include "json.hpp"

namespace evshot {

using nlohmann::json;

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["dataset"] = m.dataset;
  j["classes"] = m.classes;
  j["timesteps"] = m.timesteps;
  if (m.dim) j["dim"] = *m.dim;
  j["text_embeddings"] = m.text_embeddings;
  json samples = json::array();
  for (const SampleRecord& s : m.samples) {
    json rec;
    rec["id"] = s.id;
    rec["label"] = s.label;
    rec["split"] = s.split;
    if (!s.frames.empty()) rec["frames"] = s.frames;
    if (!s.visual.empty()) rec["visual"] = s.visual;
    samples.push_back(std::move(rec));
  }
  j["samples"] = std::move(samples);
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(std::string_view text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.dataset = j.value("dataset", "");
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.timesteps = j.value("timesteps", 0u);
    if (j.contains("dim")) m.dim = j.at("dim").get<std::uint32_t>();
    m.text_embeddings = j.value("text_embeddings", "");
    for (const json& rec : j.at("samples")) {
      SampleRecord s;
      s.id = rec.at("id").get<std::string>();
      s.label = rec.at("label").get<std::uint32_t>();
      s.split = rec.value("split", "test");
      s.frames = rec.value("frames", "");
      s.visual = rec.value("visual", "");
      if (s.label >= m.classes.size()) {
        throw Error(ErrorCode::ParseError, "sample '" + s.id + "' has label " + std::to_string(s.label) +
                                               " but only " + std::to_string(m.classes.size()) +
                                               " classes are declared");
      }
      m.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("manifest: ") + e.what());
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(std::filesystem::exists(path) ? ErrorCode::IoError : ErrorCode::MissingArtifact,
                "cannot read manifest " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return manifest_from_json(buf.str());
}

std::vector<std::filesystem::path> missing_embeddings(const DatasetManifest& m,
                                                      const std::filesystem::path& base_dir) {
  std::vector<std::filesystem::path> missing;
  auto check = [&](const std::string& rel, const char* what) {
    if (rel.empty()) {
      missing.emplace_back(std::string("<") + what + " path not set in manifest>");
      return;
    }
    const auto p = base_dir / rel;
    if (!std::filesystem::exists(p)) missing.push_back(p);
  };
  check(m.text_embeddings, "text_embeddings");
  for (const SampleRecord& s : m.samples) check(s.visual, "visual");
  return missing;
}

EmbeddingSet load_embedding_set(const DatasetManifest& m, const std::filesystem::path& base_dir,
                                bool normalize) {
  if (m.text_embeddings.empty()) {
    throw Error(ErrorCode::MissingArtifact, "manifest has no text_embeddings entry");
  }
  EmbeddingSet set;
  set.dataset = m.dataset;
  set.classes = m.classes;
  set.text = load_ncem(base_dir / m.text_embeddings, normalize);
  if (set.text.rows() != m.classes.size()) {
    throw Error(ErrorCode::DimensionMismatch, "text embeddings have " + std::to_string(set.text.rows()) +
                                                  " rows for " + std::to_string(m.classes.size()) +
                                                  " classes");
  }
  if (m.dim && *m.dim != set.text.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "manifest declares C=" + std::to_string(*m.dim) +
                                                  " but text embeddings have C=" +
                                                  std::to_string(set.text.cols()));
  }
  set.samples.reserve(m.samples.size());
  for (const SampleRecord& rec : m.samples) {
    if (rec.visual.empty()) {
      throw Error(ErrorCode::MissingArtifact, "sample '" + rec.id + "' has no visual embedding path");
    }
    EmbeddingMatrix f = load_ncem(base_dir / rec.visual, normalize);
    if (f.cols() != set.text.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "sample '" + rec.id + "' has C=" + std::to_string(f.cols()) +
                                                    ", expected " + std::to_string(set.text.cols()));
    }
    const std::size_t expected_t = set.samples.empty() ? (m.timesteps ? m.timesteps : f.rows())
                                                       : set.samples.front().features.rows();
    if (f.rows() != expected_t) {
      throw Error(ErrorCode::DimensionMismatch, "sample '" + rec.id + "' has T=" + std::to_string(f.rows()) +
                                                    ", expected " + std::to_string(expected_t));
    }
    set.samples.push_back({rec.id, rec.label, rec.split, std::move(f)});
  }
  return set;
}

}  // namespace evshot
