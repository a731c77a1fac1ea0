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
#include <span>
#include <utility>
#include <vector>

#include "evshot/event_io.hpp"

namespace evshot {

inline constexpr std::uint8_t kBackground = 127;
inline constexpr std::uint8_t kOnPixel = 255;
inline constexpr std::uint8_t kOffPixel = 0;

enum class WindowPolicy { EqualDuration, EqualCount };
enum class OverwritePolicy { LastEventWins, OnDominates };

struct ProjectionConfig {
  std::uint32_t timesteps = 1;
  WindowPolicy window = WindowPolicy::EqualDuration;
  OverwritePolicy overwrite = OverwritePolicy::LastEventWins;
};

/// Half-open time window [start, end) in microseconds.
struct TimeWindow {
  std::uint64_t start = 0;
  std::uint64_t end = 0;

  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

/// T tri-level frames (0 / 127 / 255), frame-major then row-major.
struct FrameStack {
  std::uint32_t timesteps = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<TimeWindow> windows;

  std::size_t frame_size() const noexcept { return std::size_t{height} * width; }

  std::span<const std::uint8_t> frame(std::size_t i) const noexcept {
    return std::span(pixels).subspan(i * frame_size(), frame_size());
  }

  std::uint8_t at(std::size_t t, std::size_t y, std::size_t x) const noexcept {
    return pixels[t * frame_size() + y * width + x];
  }

  friend bool operator==(const FrameStack&, const FrameStack&) = default;
};

/// Splits a canonical stream into `cfg.timesteps` windows and paints each
/// window's events onto a background frame: ON -> 255, OFF -> 0.
///
/// Equal-duration windows: with span = t_max - t_min + 1, window i covers
/// [t_min + floor(i*span/T), t_min + floor((i+1)*span/T)). Equal-count windows
/// take runs of ceil(N/T) consecutive events; window i then starts at its first
/// event and ends where the next non-empty run starts. A stream whose events
/// all share one timestamp lands entirely in frame 0. An empty stream yields
/// background frames with zero-length windows at t = 0.
FrameStack project(const EventStream& stream, const ProjectionConfig& cfg);

/// Brute-force reference for `project`: for every frame and every pixel,
/// replays the whole event list. Quadratic; tests only.
FrameStack project_oracle(const EventStream& stream, const ProjectionConfig& cfg);

/// NCFS container (little-endian): "NCFS", version u32 = 1, T, H, W (u32),
/// T*H*W pixel bytes, then T (start, end) u64 pairs.
std::vector<std::uint8_t> write_framestack(const FrameStack& frames);
FrameStack read_framestack(std::span<const std::uint8_t> bytes);

}  // namespace evshot
