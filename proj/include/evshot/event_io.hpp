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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evshot {

enum class Polarity : std::uint8_t { Off = 0, On = 1 };

struct Event {
  std::uint64_t t = 0;  // microseconds
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  Polarity polarity = Polarity::Off;

  friend bool operator==(const Event&, const Event&) = default;
};

/// A recording from one sensor. Parsers always return canonical streams:
/// events stably sorted by timestamp and inside the sensor bounds.
struct EventStream {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<Event> events;
  std::optional<std::uint32_t> label;

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

inline constexpr std::uint32_t kNmnistSensorSize = 34;
inline constexpr std::uint32_t kDvs128SensorSize = 128;

/// Throws CoordinateOutOfRange for any event outside the sensor and stably
/// sorts by timestamp.
void canonicalize(EventStream& stream);

bool is_canonical(const EventStream& stream) noexcept;

/// N-MNIST (ATIS) records: 5 bytes each. byte0 = x, byte1 = y, bit 7 of byte2
/// is the polarity, and the remaining 23 bits (byte2 low bits, byte3, byte4)
/// are a big-endian timestamp in microseconds. The 23-bit counter wrap
/// (~8.4 s) is not unwrapped.
EventStream parse_nmnist_bin(std::span<const std::uint8_t> bytes);

struct AedatOptions {
  /// When true (the default) an address with bit 0 clear is an ON event.
  bool on_when_bit_clear = true;
};

/// AEDAT 2.0 with DVS128 addressing: optional '#' header lines, then 8-byte
/// records of big-endian (address, timestamp).
EventStream parse_aedat2(std::span<const std::uint8_t> bytes, const AedatOptions& options = {});

/// Debug format: one "t,x,y,p" line per event. Blank lines are ignored.
EventStream parse_csv_events(std::string_view text, std::uint32_t width, std::uint32_t height);

std::string write_csv_events(const EventStream& stream);

}  // namespace evshot
