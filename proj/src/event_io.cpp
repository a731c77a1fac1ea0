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

#include "evshot/event_io.hpp"

#include <algorithm>
#include <charconv>

#include "evshot/error.hpp"

namespace evshot {

namespace {

void check_bounds(const Event& e, std::uint32_t width, std::uint32_t height) {
  if (e.x >= width || e.y >= height) {
    throw Error(ErrorCode::CoordinateOutOfRange,
                "event (x=" + std::to_string(e.x) + ", y=" + std::to_string(e.y) +
                    ") outside " + std::to_string(width) + "x" + std::to_string(height) +
                    " sensor");
  }
}

std::uint32_t be32(const std::uint8_t* p) noexcept {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

template <class Int>
Int parse_field(std::string_view field, std::size_t line_no) {
  Int value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad field '" +
                                           std::string(field) + "'");
  }
  return value;
}

}  // namespace

void canonicalize(EventStream& stream) {
  for (const Event& e : stream.events) check_bounds(e, stream.width, stream.height);
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
}

bool is_canonical(const EventStream& stream) noexcept {
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    if (e.x >= stream.width || e.y >= stream.height) return false;
    if (i > 0 && stream.events[i - 1].t > e.t) return false;
  }
  return true;
}

EventStream parse_nmnist_bin(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kRecord = 5;
  if (bytes.size() % kRecord != 0) {
    throw Error(ErrorCode::TruncatedRecord, "N-MNIST payload of " + std::to_string(bytes.size()) +
                                                " bytes is not a multiple of 5");
  }
  EventStream stream{kNmnistSensorSize, kNmnistSensorSize, {}, std::nullopt};
  stream.events.reserve(bytes.size() / kRecord);
  for (std::size_t off = 0; off < bytes.size(); off += kRecord) {
    const std::uint8_t* r = bytes.data() + off;
    Event e;
    e.x = r[0];
    e.y = r[1];
    e.polarity = (r[2] & 0x80) ? Polarity::On : Polarity::Off;
    e.t = (std::uint64_t{r[2] & 0x7Fu} << 16) | (std::uint64_t{r[3]} << 8) | r[4];
    check_bounds(e, stream.width, stream.height);
    stream.events.push_back(e);
  }
  canonicalize(stream);
  return stream;
}

EventStream parse_aedat2(std::span<const std::uint8_t> bytes, const AedatOptions& options) {
  std::size_t pos = 0;
  bool first_line = true;
  while (pos < bytes.size() && bytes[pos] == '#') {
    auto nl = std::find(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), '\n');
    if (nl == bytes.end()) {
      throw Error(ErrorCode::MalformedHeader,
                  "header line at offset " + std::to_string(pos) + " has no terminating newline");
    }
    std::string_view line(reinterpret_cast<const char*>(bytes.data() + pos),
                          static_cast<std::size_t>(nl - bytes.begin()) - pos);
    if (first_line && line.starts_with("#!AER-DAT") && !line.starts_with("#!AER-DAT2")) {
      throw Error(ErrorCode::MalformedHeader, "unsupported AEDAT version '" + std::string(line) + "'");
    }
    first_line = false;
    pos = static_cast<std::size_t>(nl - bytes.begin()) + 1;
  }

  constexpr std::size_t kRecord = 8;
  const std::size_t payload = bytes.size() - pos;
  if (payload % kRecord != 0) {
    throw Error(ErrorCode::TruncatedRecord, "AEDAT payload of " + std::to_string(payload) +
                                                " bytes is not a multiple of 8");
  }
  EventStream stream{kDvs128SensorSize, kDvs128SensorSize, {}, std::nullopt};
  stream.events.reserve(payload / kRecord);
  for (; pos < bytes.size(); pos += kRecord) {
    const std::uint32_t addr = be32(bytes.data() + pos);
    Event e;
    e.t = be32(bytes.data() + pos + 4);
    e.x = (addr >> 1) & 0x7F;
    e.y = (addr >> 8) & 0x7F;
    const bool bit = (addr & 1u) != 0;
    e.polarity = (bit != options.on_when_bit_clear) ? Polarity::On : Polarity::Off;
    stream.events.push_back(e);
  }
  canonicalize(stream);
  return stream;
}

EventStream parse_csv_events(std::string_view text, std::uint32_t width, std::uint32_t height) {
  EventStream stream{width, height, {}, std::nullopt};
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::string_view fields[4];
    std::size_t n = 0;
    while (true) {
      const auto comma = line.find(',');
      if (n == 4) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 4 fields");
      }
      fields[n++] = line.substr(0, comma);
      if (comma == std::string_view::npos) break;
      line = line.substr(comma + 1);
    }
    if (n != 4) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 4 fields");
    }
    Event e;
    e.t = parse_field<std::uint64_t>(fields[0], line_no);
    e.x = parse_field<std::uint32_t>(fields[1], line_no);
    e.y = parse_field<std::uint32_t>(fields[2], line_no);
    const auto p = parse_field<unsigned>(fields[3], line_no);
    if (p > 1) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": polarity must be 0 or 1");
    }
    e.polarity = static_cast<Polarity>(p);
    check_bounds(e, width, height);
    stream.events.push_back(e);
  }
  canonicalize(stream);
  return stream;
}

std::string write_csv_events(const EventStream& stream) {
  std::string out;
  out.reserve(stream.events.size() * 16);
  for (const Event& e : stream.events) {
    out += std::to_string(e.t);
    out += ',';
    out += std::to_string(e.x);
    out += ',';
    out += std::to_string(e.y);
    out += ',';
    out += e.polarity == Polarity::On ? '1' : '0';
    out += '\n';
  }
  return out;
}

}  // namespace evshot
