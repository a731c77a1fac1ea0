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

// Deliberately naive. Frame membership uses the inequality form
//   i*span < (d+1)*T <= (i+1)*span,   d = t - t_min
// rather than the sweep over precomputed bounds used by project().

#include <string>

#include "evshot/error.hpp"
#include "evshot/projection.hpp"

namespace evshot {

namespace {

__extension__ using u128 = unsigned __int128;

bool in_frame(const EventStream& s, const ProjectionConfig& cfg, std::size_t k, std::uint32_t frame) {
  const auto& ev = s.events;
  const std::uint64_t t_min = ev.front().t;
  const std::uint64_t t_max = ev.back().t;
  if (t_min == t_max) return frame == 0;
  const std::uint64_t T = cfg.timesteps;
  if (cfg.window == WindowPolicy::EqualCount) {
    const std::uint64_t run = (ev.size() + T - 1) / T;
    return k >= frame * run && k < (frame + 1) * run;
  }
  const u128 span = u128{t_max} - t_min + 1;
  const u128 lhs = (u128{ev[k].t} - t_min + 1) * T;
  return u128{frame} * span < lhs && lhs <= (u128{frame} + 1) * span;
}

}  // namespace

FrameStack project_oracle(const EventStream& stream, const ProjectionConfig& cfg) {
  if (cfg.timesteps < 1) throw Error(ErrorCode::InvalidConfig, "timesteps must be >= 1");
  for (std::size_t k = 0; k < stream.events.size(); ++k) {
    const Event& e = stream.events[k];
    if (e.x >= stream.width || e.y >= stream.height || (k > 0 && stream.events[k - 1].t > e.t)) {
      throw Error(ErrorCode::InvalidConfig, "projection requires a canonical (sorted, in-bounds) stream");
    }
  }

  FrameStack fs;
  fs.timesteps = cfg.timesteps;
  fs.height = stream.height;
  fs.width = stream.width;
  fs.windows.assign(cfg.timesteps, TimeWindow{});
  const std::size_t n = stream.events.size();

  for (std::uint32_t f = 0; f < cfg.timesteps; ++f) {
    for (std::uint32_t y = 0; y < stream.height; ++y) {
      for (std::uint32_t x = 0; x < stream.width; ++x) {
        bool saw_on = false;
        bool saw_any = false;
        std::uint8_t last = kBackground;
        for (std::size_t k = 0; k < n; ++k) {
          const Event& e = stream.events[k];
          if (e.x != x || e.y != y || !in_frame(stream, cfg, k, f)) continue;
          saw_any = true;
          saw_on = saw_on || e.polarity == Polarity::On;
          last = e.polarity == Polarity::On ? kOnPixel : kOffPixel;
        }
        std::uint8_t value = last;
        if (cfg.overwrite == OverwritePolicy::OnDominates && saw_any) value = saw_on ? kOnPixel : kOffPixel;
        fs.pixels.push_back(value);
      }
    }
  }

  if (n == 0) return fs;
  const std::uint64_t t_min = stream.events.front().t;
  const std::uint64_t t_max = stream.events.back().t;
  const std::uint64_t past_end = t_max + 1;
  // Window i starts at the earliest timestamp any event of frame i could have;
  // for equal-duration that is the smallest d with (d+1)*T > i*span.
  for (std::uint32_t f = 0; f < cfg.timesteps; ++f) {
    std::uint64_t start = past_end;
    if (t_min == t_max) {
      start = f == 0 ? t_min : past_end;
    } else if (cfg.window == WindowPolicy::EqualDuration) {
      const u128 span = u128{t_max} - t_min + 1;
      for (std::uint64_t d = 0; d < static_cast<std::uint64_t>(span); ++d) {
        if ((u128{d} + 1) * cfg.timesteps > u128{f} * span) {
          start = t_min + d;
          break;
        }
      }
    } else {
      if (f == 0) {
        start = t_min;
      } else {
        for (std::size_t k = 0; k < n; ++k) {
          if (in_frame(stream, cfg, k, f)) {
            start = stream.events[k].t;
            break;
          }
        }
      }
    }
    fs.windows[f].start = start;
  }
  for (std::uint32_t f = 0; f + 1 < cfg.timesteps; ++f) fs.windows[f].end = fs.windows[f + 1].start;
  fs.windows.back().end = past_end;
  return fs;
}

}  // namespace evshot
