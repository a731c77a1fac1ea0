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

#include <random>

#include "doctest.h"
#include "evshot/error.hpp"
#include "evshot/event_io.hpp"
#include "synthetic.hpp"

using namespace evshot;

namespace {

std::vector<std::uint8_t> bytes_of(std::string_view s) { return {s.begin(), s.end()}; }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

}  // namespace

// Expected events below come from tests/oracles/reference_values.py, an
// independent decoder of the record layouts.

TEST_CASE("N-MNIST records decode bit-exactly") {
  SUBCASE("empty input") {
    const auto s = parse_nmnist_bin({});
    CHECK(s.events.empty());
    CHECK(s.width == 34);
    CHECK(s.height == 34);
  }
  SUBCASE("single ON record") {
    const std::vector<std::uint8_t> b{0x03, 0x05, 0x80, 0x00, 0x0A};
    const auto s = parse_nmnist_bin(b);
    REQUIRE(s.events.size() == 1);
    CHECK(s.events[0] == Event{10, 3, 5, Polarity::On});
  }
  SUBCASE("maximum timestamp, OFF") {
    const std::vector<std::uint8_t> b{0x21, 0x00, 0x7F, 0xFF, 0xFF};
    const auto s = parse_nmnist_bin(b);
    REQUIRE(s.events.size() == 1);
    CHECK(s.events[0] == Event{8388607, 33, 0, Polarity::Off});
  }
  SUBCASE("records are sorted by time, ties keep file order") {
    const std::vector<std::uint8_t> b{0x01, 0x01, 0x00, 0x00, 0x09,  //
                                      0x02, 0x02, 0x80, 0x00, 0x05,  //
                                      0x03, 0x03, 0x00, 0x00, 0x05};
    const auto s = parse_nmnist_bin(b);
    REQUIRE(s.events.size() == 3);
    CHECK(s.events[0] == Event{5, 2, 2, Polarity::On});
    CHECK(s.events[1] == Event{5, 3, 3, Polarity::Off});
    CHECK(s.events[2] == Event{9, 1, 1, Polarity::Off});
  }
  SUBCASE("errors") {
    const std::vector<std::uint8_t> out_of_range{0x03, 0x05, 0x80, 0x00, 0x0A, 0xFF, 0x00, 0x00, 0x00, 0x00};
    CHECK(code_of([&] { parse_nmnist_bin(out_of_range); }) == ErrorCode::CoordinateOutOfRange);
    const std::vector<std::uint8_t> y_out{0x00, 0x22, 0x00, 0x00, 0x00};
    CHECK(code_of([&] { parse_nmnist_bin(y_out); }) == ErrorCode::CoordinateOutOfRange);
    const std::vector<std::uint8_t> truncated{0x03, 0x05, 0x80, 0x00};
    CHECK(code_of([&] { parse_nmnist_bin(truncated); }) == ErrorCode::TruncatedRecord);
  }
}

TEST_CASE("AEDAT 2.0 records decode bit-exactly") {
  SUBCASE("header only") {
    const auto s = parse_aedat2(bytes_of("#!AER-DAT2.0\n"));
    CHECK(s.events.empty());
    CHECK(s.width == 128);
    CHECK(s.height == 128);
  }
  SUBCASE("single record with bit 0 clear is ON by default") {
    auto b = bytes_of("#!AER-DAT2.0\n# start\n");
    append_be32(b, 0x206);
    append_be32(b, 0x64);
    const auto s = parse_aedat2(b);
    REQUIRE(s.events.size() == 1);
    CHECK(s.events[0] == Event{100, 3, 2, Polarity::On});

    AedatOptions flipped;
    flipped.on_when_bit_clear = false;
    const auto f = parse_aedat2(b, flipped);
    CHECK(f.events[0] == Event{100, 3, 2, Polarity::Off});
  }
  SUBCASE("all address bits set") {
    std::vector<std::uint8_t> b;
    append_be32(b, 0x7FFF);
    append_be32(b, 0x100);
    const auto s = parse_aedat2(b);
    REQUIRE(s.events.size() == 1);
    CHECK(s.events[0] == Event{256, 127, 127, Polarity::Off});
  }
  SUBCASE("records are sorted") {
    std::vector<std::uint8_t> b;
    append_be32(b, 0x0);
    append_be32(b, 50);
    append_be32(b, 0x2);
    append_be32(b, 10);
    const auto s = parse_aedat2(b);
    REQUIRE(s.events.size() == 2);
    CHECK(s.events[0].t == 10);
    CHECK(s.events[1].t == 50);
  }
  SUBCASE("errors") {
    auto seven = bytes_of("#!AER-DAT2.0\n");
    seven.insert(seven.end(), 7, 0);
    CHECK(code_of([&] { parse_aedat2(seven); }) == ErrorCode::TruncatedRecord);
    CHECK(code_of([&] { parse_aedat2(bytes_of("#!AER-DAT2.0")); }) == ErrorCode::MalformedHeader);
    CHECK(code_of([&] { parse_aedat2(bytes_of("#!AER-DAT3.1\n")); }) == ErrorCode::MalformedHeader);
  }
}

TEST_CASE("CSV events") {
  SUBCASE("examples") {
    const auto s = parse_csv_events("0,1,1,1\n5,2,0,0", 3, 3);
    REQUIRE(s.events.size() == 2);
    CHECK(s.events[0] == Event{0, 1, 1, Polarity::On});
    CHECK(s.events[1] == Event{5, 2, 0, Polarity::Off});

    const auto u = parse_csv_events("5,1,1,1\n0,2,0,0", 3, 3);
    CHECK(u.events[0].t == 0);
    CHECK(u.events[1].t == 5);

    const auto blank = parse_csv_events("\n1,0,0,1\r\n\n", 3, 3);
    CHECK(blank.events.size() == 1);
  }
  SUBCASE("errors") {
    CHECK(code_of([] { parse_csv_events("0,9,0,1", 3, 3); }) == ErrorCode::CoordinateOutOfRange);
    CHECK(code_of([] { parse_csv_events("0,1,1,2", 3, 3); }) == ErrorCode::ParseError);
    CHECK(code_of([] { parse_csv_events("0,1,1", 3, 3); }) == ErrorCode::ParseError);
    CHECK(code_of([] { parse_csv_events("a,1,1,1", 3, 3); }) == ErrorCode::ParseError);
    CHECK(code_of([] { parse_csv_events("-1,1,1,1", 3, 3); }) == ErrorCode::ParseError);
    try {
      parse_csv_events("0,1,1,1\n0,1,x,1\n", 3, 3);
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("writer formatting") {
    EventStream s;
    s.width = s.height = 8;
    CHECK(write_csv_events(s).empty());
    s.events.push_back({10, 3, 5, Polarity::On});
    CHECK(write_csv_events(s) == "10,3,5,1\n");
  }
}

TEST_CASE("CSV round trip over generated streams") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const std::uint32_t w = 1 + static_cast<std::uint32_t>(rng() % 64);
    const std::uint32_t h = 1 + static_cast<std::uint32_t>(rng() % 64);
    const EventStream s = testing::random_stream(rng, w, h, 1000, std::uint64_t{1} << 40, true);
    const EventStream back = parse_csv_events(write_csv_events(s), w, h);
    REQUIRE(back == s);
  }
}

TEST_CASE("parsers are deterministic and always sorted and in bounds") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::uint8_t> b;
    const std::size_t n = rng() % 50;
    for (std::size_t k = 0; k < n; ++k) {
      b.push_back(static_cast<std::uint8_t>(rng() % 34));
      b.push_back(static_cast<std::uint8_t>(rng() % 34));
      for (int j = 0; j < 3; ++j) b.push_back(static_cast<std::uint8_t>(rng()));
    }
    const auto a = parse_nmnist_bin(b);
    CHECK(a == parse_nmnist_bin(b));
    CHECK(is_canonical(a));
  }
}

TEST_CASE("canonicalize rejects out-of-range events instead of clamping") {
  EventStream s;
  s.width = 4;
  s.height = 4;
  s.events = {{3, 1, 1, Polarity::On}, {1, 4, 0, Polarity::On}};
  CHECK(code_of([&] { canonicalize(s); }) == ErrorCode::CoordinateOutOfRange);
  s.events[1].x = 3;
  canonicalize(s);
  CHECK(is_canonical(s));
  CHECK(s.events[0].t == 1);
}
