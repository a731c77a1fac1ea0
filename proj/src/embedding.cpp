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

#include "evshot/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "binio.hpp"
#include "evshot/error.hpp"

namespace evshot {

EmbeddingMatrix::EmbeddingMatrix(EmbeddingRole role, std::size_t rows, std::size_t cols,
                                 std::vector<float> values, std::vector<std::string> labels)
    : role_(role), rows_(rows), cols_(cols), values_(std::move(values)), labels_(std::move(labels)) {
  if (values_.size() != rows_ * cols_) {
    throw Error(ErrorCode::DimensionMismatch, "matrix " + std::to_string(rows_) + "x" +
                                                  std::to_string(cols_) + " given " +
                                                  std::to_string(values_.size()) + " values");
  }
  // A single empty label is indistinguishable from "no labels" on disk.
  if (labels_.size() == 1 && labels_[0].empty()) labels_.clear();
  if (!labels_.empty() && labels_.size() != rows_) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(labels_.size()) + " labels for " +
                                                  std::to_string(rows_) + " rows");
  }
  for (const auto& label : labels_) {
    if (label.find('\n') != std::string::npos) {
      throw Error(ErrorCode::ParseError, "row label contains a newline");
    }
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw Error(ErrorCode::NonFiniteValue, "value at row " + std::to_string(i / std::max<std::size_t>(cols_, 1)) +
                                                 ", col " + std::to_string(i % std::max<std::size_t>(cols_, 1)) +
                                                 " is not finite");
    }
  }
}

std::vector<std::uint8_t> write_ncem(const EmbeddingMatrix& m) {
  std::string label_block;
  for (std::size_t i = 0; i < m.labels().size(); ++i) {
    if (i) label_block += '\n';
    label_block += m.labels()[i];
  }
  detail::ByteWriter w;
  w.magic("NCEM");
  w.u32(1);
  w.u8(static_cast<std::uint8_t>(m.role()));
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  w.u32(static_cast<std::uint32_t>(label_block.size()));
  w.raw(std::span(reinterpret_cast<const std::uint8_t*>(label_block.data()), label_block.size()));
  w.f32s(m.values());
  return std::move(w).take();
}

EmbeddingMatrix read_ncem(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, ErrorCode::DimensionMismatch, "NCEM");
  r.expect_magic("NCEM");
  const std::uint32_t version = r.u32();
  if (version != 1) throw Error(ErrorCode::ParseError, "NCEM: unsupported version " + std::to_string(version));
  const std::uint8_t role = r.u8();
  if (role > 1) throw Error(ErrorCode::ParseError, "NCEM: unknown role " + std::to_string(role));
  const std::size_t rows = r.u32();
  const std::size_t cols = r.u32();
  const std::size_t label_len = r.u32();
  auto label_bytes = r.take(label_len);

  std::vector<std::string> labels;
  if (label_len > 0) {
    std::string_view text(reinterpret_cast<const char*>(label_bytes.data()), label_bytes.size());
    while (true) {
      const auto nl = text.find('\n');
      labels.emplace_back(text.substr(0, nl));
      if (nl == std::string_view::npos) break;
      text = text.substr(nl + 1);
    }
  }

  const std::size_t count = rows * cols;
  if (r.remaining() != count * 4) {
    throw Error(ErrorCode::DimensionMismatch, "NCEM: header declares " + std::to_string(rows) + "x" +
                                                  std::to_string(cols) + " floats but " +
                                                  std::to_string(r.remaining()) + " bytes follow");
  }
  std::vector<float> values(count);
  for (float& v : values) v = r.f32();
  return EmbeddingMatrix(static_cast<EmbeddingRole>(role), rows, cols, std::move(values), std::move(labels));
}

EmbeddingMatrix l2_normalize_rows(const EmbeddingMatrix& m) {
  std::vector<float> out(m.values().begin(), m.values().end());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sq = 0.0;
    for (float v : m.row(r)) sq += double{v} * v;
    if (sq == 0.0) throw Error(ErrorCode::ZeroRow, "row " + std::to_string(r) + " has zero norm");
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      out[r * m.cols() + c] = static_cast<float>(m(r, c) * inv);
    }
  }
  return EmbeddingMatrix(m.role(), m.rows(), m.cols(), std::move(out), m.labels());
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
      throw Error(ErrorCode::MissingArtifact, "file not found: " + path.string());
    }
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

EmbeddingMatrix load_ncem(const std::filesystem::path& path, bool normalize) {
  const auto bytes = read_file_bytes(path);
  EmbeddingMatrix m = read_ncem(bytes);
  return normalize ? l2_normalize_rows(m) : m;
}

}  // namespace evshot
