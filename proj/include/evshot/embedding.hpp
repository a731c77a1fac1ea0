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
#include <span>
#include <string>
#include <vector>

namespace evshot {

enum class EmbeddingRole : std::uint8_t { Text = 0, Visual = 1 };

/// Row-major float32 matrix. Text matrices hold one row per class (K x C);
/// visual matrices hold one row per timestep (T x C).
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  /// Throws DimensionMismatch if values.size() != rows*cols or the label count
  /// is neither 0 nor rows, NonFiniteValue on NaN/Inf, and ParseError for
  /// labels containing a newline.
  EmbeddingMatrix(EmbeddingRole role, std::size_t rows, std::size_t cols, std::vector<float> values,
                  std::vector<std::string> labels = {});

  EmbeddingRole role() const noexcept { return role_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const float> values() const noexcept { return values_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  std::span<const float> row(std::size_t r) const noexcept {
    return std::span(values_).subspan(r * cols_, cols_);
  }

  float operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  EmbeddingRole role_ = EmbeddingRole::Text;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> values_;
  std::vector<std::string> labels_;
};

/// NCEM container (little-endian): "NCEM", version u32 = 1, role u8,
/// rows u32, cols u32, label block length u32 + UTF-8 labels joined by '\n',
/// then rows*cols float32 values.
std::vector<std::uint8_t> write_ncem(const EmbeddingMatrix& matrix);
EmbeddingMatrix read_ncem(std::span<const std::uint8_t> bytes);

/// Scales every row to unit Euclidean norm (computed in double). Throws ZeroRow.
EmbeddingMatrix l2_normalize_rows(const EmbeddingMatrix& matrix);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Reads and validates an NCEM file, optionally row-normalizing it. Missing
/// files raise MissingArtifact naming the path.
EmbeddingMatrix load_ncem(const std::filesystem::path& path, bool normalize);

}  // namespace evshot
