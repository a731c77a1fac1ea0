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

#include "evshot/projection.hpp"

#include <algorithm>
#include <string>

#include "binio.hpp"
#include "evshot/error.hpp"

namespace evshot {

namespace {

__extension__ using u128 = unsigned __int128;

void validate(const EventStream& stream, const ProjectionConfig& cfg) {
  if (cfg.timesteps < 1) throw Error(ErrorCode::InvalidConfig, "timesteps must be >= 1");
  if (!is_canonical(stream)) {
    throw Error(ErrorCode::InvalidConfig, "projection requires a canonical (sorted, in-bounds) stream");
  }
}

std::uint64_t floor_fraction(std::uint64_t i, std::uint64_t span, std::uint64_t steps) {
  return static_cast<std::uint64_t>((static_cast<u128>(i) * span) / steps);
}

// Returns, for every event, the index of the frame it is painted on, and fills
// the window bounds.
std::vector<std::uint32_t> assign_frames(const EventStream& stream, const ProjectionConfig& cfg,
                                         std::vector<TimeWindow>& windows) {
  const std::uint32_t T = cfg.timesteps;
  const auto& events = stream.events;
  const std::size_t n = events.size();
  std::vector<std::uint32_t> frame_of(n, 0);
  windows.assign(T, TimeWindow{});
  if (n == 0) return frame_of;

  const std::uint64_t t_min = events.front().t;
  const std::uint64_t t_max = events.back().t;
  if (t_min == t_max) {
    windows[0] = {t_min, t_max + 1};
    for (std::uint32_t i = 1; i < T; ++i) windows[i] = {t_max + 1, t_max + 1};
    return frame_of;
  }

  if (cfg.window == WindowPolicy::EqualDuration) {
    const std::uint64_t span = t_max - t_min + 1;
    for (std::uint32_t i = 0; i < T; ++i) {
      windows[i] = {t_min + floor_fraction(i, span, T), t_min + floor_fraction(i + 1, span, T)};
    }
    std::uint32_t f = 0;
    for (std::size_t k = 0; k < n; ++k) {
      while (events[k].t >= windows[f].end) ++f;
      frame_of[k] = f;
    }
    return frame_of;
  }

  const std::size_t run = (n + T - 1) / T;
  for (std::size_t k = 0; k < n; ++k) frame_of[k] = static_cast<std::uint32_t>(k / run);
  for (std::uint32_t i = 0; i < T; ++i) {
    const std::size_t first = std::size_t{i} * run;
    windows[i].start = i == 0 ? t_min : (first < n ? events[first].t : t_max + 1);
  }
  for (std::uint32_t i = 0; i + 1 < T; ++i) windows[i].end = windows[i + 1].start;
  windows[T - 1].end = t_max + 1;
  return frame_of;
}

}  // namespace

FrameStack project(const EventStream& stream, const ProjectionConfig& cfg) {
  validate(stream, cfg);
  FrameStack out;
  out.timesteps = cfg.timesteps;
  out.height = stream.height;
  out.width = stream.width;
  out.pixels.assign(std::size_t{cfg.timesteps} * out.frame_size(), kBackground);

  const std::vector<std::uint32_t> frame_of = assign_frames(stream, cfg, out.windows);
  const std::size_t plane = out.frame_size();
  for (std::size_t k = 0; k < stream.events.size(); ++k) {
    const Event& e = stream.events[k];
    std::uint8_t& px = out.pixels[frame_of[k] * plane + std::size_t{e.y} * out.width + e.x];
    if (e.polarity == Polarity::On) {
      px = kOnPixel;
    } else if (cfg.overwrite == OverwritePolicy::LastEventWins || px != kOnPixel) {
      px = kOffPixel;
    }
  }
  return out;
}

std::vector<std::uint8_t> write_framestack(const FrameStack& frames) {
  detail::ByteWriter w;
  w.magic("NCFS");
  w.u32(1);
  w.u32(frames.timesteps);
  w.u32(frames.height);
  w.u32(frames.width);
  w.raw(frames.pixels);
  for (const TimeWindow& win : frames.windows) {
    w.u64(win.start);
    w.u64(win.end);
  }
  return std::move(w).take();
}

FrameStack read_framestack(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, ErrorCode::DimensionMismatch, "NCFS");
  r.expect_magic("NCFS");
  const std::uint32_t version = r.u32();
  if (version != 1) throw Error(ErrorCode::ParseError, "NCFS: unsupported version " + std::to_string(version));
  FrameStack fs;
  fs.timesteps = r.u32();
  fs.height = r.u32();
  fs.width = r.u32();
  const u128 declared =
      static_cast<u128>(fs.timesteps) * fs.height * fs.width +
      static_cast<u128>(fs.timesteps) * 16;
  if (declared != r.remaining()) {
    throw Error(ErrorCode::DimensionMismatch,
                "NCFS: header declares " + std::to_string(fs.timesteps) + "x" +
                    std::to_string(fs.height) + "x" + std::to_string(fs.width) + " but " +
                    std::to_string(r.remaining()) + " bytes follow");
  }
  auto payload = r.take(std::size_t{fs.timesteps} * fs.frame_size());
  fs.pixels.assign(payload.begin(), payload.end());
  for (std::uint8_t p : fs.pixels) {
    if (p != kBackground && p != kOnPixel && p != kOffPixel) {
      throw Error(ErrorCode::ParseError, "NCFS: pixel value " + std::to_string(p) + " outside {0,127,255}");
    }
  }
  fs.windows.resize(fs.timesteps);
  for (TimeWindow& win : fs.windows) {
    win.start = r.u64();
    win.end = r.u64();
  }
  return fs;
}

}  // namespace evshot
