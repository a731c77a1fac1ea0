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
#include <string>
#include <string_view>
#include <vector>

#include "evshot/event_io.hpp"

namespace evshot::cli {

enum class DatasetKind { Nmnist, Cifar10Dvs, Csv };

DatasetKind parse_dataset_kind(std::string_view name);
std::string_view to_string(DatasetKind kind) noexcept;

struct Recording {
  std::filesystem::path path;
  std::string id;  // "<split>/<class>/<file stem>"
  std::uint32_t label = 0;
  std::string split;
};

struct DatasetLayout {
  std::vector<std::string> classes;
  std::vector<Recording> recordings;
};

/// Finds recordings under `root`. With `train/` and `test/` (any case)
/// subdirectories, each holds one directory per class. Otherwise class
/// directories sit directly under `root` and the last `test_fraction` of each
/// class's files (by name) form the test split. Results are sorted.
DatasetLayout discover_dataset(const std::filesystem::path& root, DatasetKind kind, double test_fraction);

struct RecordingFormat {
  DatasetKind kind = DatasetKind::Csv;
  std::uint32_t width = 0;   // CSV only
  std::uint32_t height = 0;  // CSV only
  AedatOptions aedat;
};

EventStream load_recording(const std::filesystem::path& path, const RecordingFormat& format);

}  // namespace evshot::cli
