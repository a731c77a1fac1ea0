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

#include "evshot/cli/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "evshot/embedding.hpp"
#include "evshot/error.hpp"

namespace evshot::cli {

namespace fs = std::filesystem;

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "nmnist") return DatasetKind::Nmnist;
  if (name == "cifar10dvs") return DatasetKind::Cifar10Dvs;
  if (name == "csv") return DatasetKind::Csv;
  throw Error(ErrorCode::InvalidConfig, "unknown dataset kind '" + std::string(name) + "'");
}

std::string_view to_string(DatasetKind kind) noexcept {
  switch (kind) {
    case DatasetKind::Nmnist: return "nmnist";
    case DatasetKind::Cifar10Dvs: return "cifar10dvs";
    case DatasetKind::Csv: return "csv";
  }
  return "unknown";
}

namespace {

std::string_view extension_for(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Nmnist: return ".bin";
    case DatasetKind::Cifar10Dvs: return ".aedat";
    case DatasetKind::Csv: return ".csv";
  }
  return "";
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories, std::string_view ext) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (directories ? entry.is_directory() : (entry.is_regular_file() && entry.path().extension() == ext)) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

DatasetLayout discover_dataset(const fs::path& root, DatasetKind kind, double test_fraction) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorCode::IoError, "dataset root '" + root.string() + "' is not a readable directory");
  }
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "test fraction must be in [0, 1]");
  }
  const std::string_view ext = extension_for(kind);

  // split name -> class name -> files
  std::map<std::string, std::map<std::string, std::vector<fs::path>>> tree;
  fs::path train_dir, test_dir;
  try {
    for (const fs::path& dir : sorted_entries(root, true, "")) {
      const std::string name = lower(dir.filename().string());
      if (name == "train") train_dir = dir;
      if (name == "test") test_dir = dir;
    }
    if (!train_dir.empty() || !test_dir.empty()) {
      for (const auto& [split, dir] : {std::pair{std::string("train"), train_dir}, std::pair{std::string("test"), test_dir}}) {
        if (dir.empty()) continue;
        for (const fs::path& cls : sorted_entries(dir, true, "")) {
          tree[split][cls.filename().string()] = sorted_entries(cls, false, ext);
        }
      }
    } else {
      for (const fs::path& cls : sorted_entries(root, true, "")) {
        auto files = sorted_entries(cls, false, ext);
        const auto n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(files.size())));
        const std::size_t n_train = files.size() - n_test;
        auto& train = tree["train"][cls.filename().string()];
        auto& test = tree["test"][cls.filename().string()];
        train.assign(files.begin(), files.begin() + static_cast<std::ptrdiff_t>(n_train));
        test.assign(files.begin() + static_cast<std::ptrdiff_t>(n_train), files.end());
      }
    }
  } catch (const fs::filesystem_error& e) {
    throw Error(ErrorCode::IoError, std::string("cannot scan dataset: ") + e.what());
  }

  DatasetLayout layout;
  for (const auto& [split, classes] : tree) {
    for (const auto& [cls, files] : classes) {
      if (std::find(layout.classes.begin(), layout.classes.end(), cls) == layout.classes.end()) {
        layout.classes.push_back(cls);
      }
    }
  }
  std::sort(layout.classes.begin(), layout.classes.end());
  for (const std::string split : {"train", "test"}) {
    for (const auto& [cls, files] : tree[split]) {
      const auto label = static_cast<std::uint32_t>(
          std::find(layout.classes.begin(), layout.classes.end(), cls) - layout.classes.begin());
      for (const fs::path& f : files) {
        layout.recordings.push_back({f, split + "/" + cls + "/" + f.stem().string(), label, split});
      }
    }
  }
  if (layout.recordings.empty()) {
    throw Error(ErrorCode::IoError, "no '" + std::string(ext) + "' recordings found under " + root.string());
  }
  return layout;
}

EventStream load_recording(const fs::path& path, const RecordingFormat& format) {
  const auto bytes = read_file_bytes(path);
  try {
    switch (format.kind) {
      case DatasetKind::Nmnist: return parse_nmnist_bin(bytes);
      case DatasetKind::Cifar10Dvs: return parse_aedat2(bytes, format.aedat);
      case DatasetKind::Csv:
        return parse_csv_events(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                                format.width, format.height);
    }
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
  throw Error(ErrorCode::InvalidConfig, "unknown dataset kind");
}

}  // namespace evshot::cli
