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

#include "synthetic.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>

#include "evshot/cli/atomic_file.hpp"

namespace evshot::testing {

namespace fs = std::filesystem;

namespace {

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

std::vector<double> normalized(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

}  // namespace

EmbeddingSet make_synthetic_set(const SyntheticSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const std::size_t K = spec.classes, C = spec.dim, T = spec.timesteps;
  std::vector<std::vector<double>> text(K);
  for (auto& t : text) t = normalized(gaussian(rng, C));

  std::vector<std::vector<double>> proto(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto noise = gaussian(rng, C);
    std::vector<double> m(C);
    for (std::size_t c = 0; c < C; ++c) {
      m[c] = text[k][c] + spec.confusion * text[(k + 1) % K][c] + spec.prototype_noise * noise[c] / std::sqrt(double(C));
    }
    proto[k] = normalized(m);
  }

  EmbeddingSet set;
  set.dataset = "synthetic";
  std::vector<float> text_values;
  for (std::size_t k = 0; k < K; ++k) {
    set.classes.push_back("class" + std::to_string(k));
    for (double x : text[k]) text_values.push_back(static_cast<float>(x));
  }
  set.text = EmbeddingMatrix(EmbeddingRole::Text, K, C, text_values, set.classes);

  auto draw = [&](std::size_t k) {
    std::vector<float> values;
    for (std::size_t t = 0; t < T; ++t) {
      const auto noise = gaussian(rng, C);
      std::vector<double> f(C);
      for (std::size_t c = 0; c < C; ++c) f[c] = proto[k][c] + spec.sample_noise * noise[c] / std::sqrt(double(C));
      for (double x : normalized(f)) values.push_back(static_cast<float>(x));
    }
    return EmbeddingMatrix(EmbeddingRole::Visual, T, C, values);
  };
  for (const char* split : {"train", "test"}) {
    const std::size_t per = std::string(split) == "train" ? spec.train_per_class : spec.test_per_class;
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = 0; j < per; ++j) {
        set.samples.push_back({std::string(split) + "/" + set.classes[k] + "/s" + std::to_string(j),
                               static_cast<std::uint32_t>(k), split, draw(k)});
      }
    }
  }
  return set;
}

fs::path write_embedding_set(const EmbeddingSet& set, const fs::path& dir) {
  DatasetManifest m;
  m.dataset = set.dataset;
  m.classes = set.classes;
  m.timesteps = static_cast<std::uint32_t>(set.timesteps());
  m.dim = static_cast<std::uint32_t>(set.dim());
  m.text_embeddings = "text.ncem";
  cli::write_file_atomic(dir / "text.ncem", write_ncem(set.text));
  for (const EmbeddedSample& s : set.samples) {
    const std::string visual = "embeddings/" + s.id + ".ncem";
    cli::write_file_atomic(dir / visual, write_ncem(s.features));
    m.samples.push_back({s.id, s.label, s.split, "frames/" + s.id + ".ncfs", visual});
  }
  cli::write_text_atomic(dir / "manifest.json", manifest_to_json(m));
  return dir / "manifest.json";
}

EventStream random_stream(std::mt19937_64& rng, std::uint32_t width, std::uint32_t height, std::size_t max_events,
                          std::uint64_t max_time, bool sorted) {
  EventStream s;
  s.width = width;
  s.height = height;
  const std::size_t n = std::uniform_int_distribution<std::size_t>(0, max_events)(rng);
  std::uniform_int_distribution<std::uint64_t> td(0, max_time);
  std::uniform_int_distribution<std::uint32_t> xd(0, width - 1), yd(0, height - 1), pd(0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    s.events.push_back({td(rng), xd(rng), yd(rng), pd(rng) ? Polarity::On : Polarity::Off});
  }
  if (sorted) canonicalize(s);
  return s;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          ("evshot_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace evshot::testing
