/*
 * Copyright 2026 the qkdtwin authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdint>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "qkdtwin/block_memory.hpp"
#include "test_util.hpp"

using namespace qkdtwin;
using qkdtwin_test::error_code_of;

namespace {

std::vector<std::uint32_t> counting_words(std::uint32_t first, std::size_t n) {
  std::vector<std::uint32_t> v(n);
  std::iota(v.begin(), v.end(), first);
  return v;
}

}  // namespace

TEST_CASE("a top-down memory starts with both halves waiting for the host") {
  BlockMemory mem(StreamId::kPol, MemoryDirection::kTopDown, 1024);
  CHECK(mem.half_words() == 512);
  CHECK(mem.owner(0) == HalfOwner::kHost);
  CHECK(mem.owner(1) == HalfOwner::kHost);
  CHECK(mem.readable_words() == 0);
  CHECK(error_code_of([&] { mem.read_advance(1); }) == ErrorCode::kUnderrun);
}

TEST_CASE("reading a half flips its ownership and raises one interrupt") {
  BlockMemory mem(StreamId::kDecoy, MemoryDirection::kTopDown, 1024);
  mem.host_write_half(0, counting_words(0, 512));
  mem.host_write_half(1, counting_words(512, 512));
  CHECK(mem.readable_words() == 1024);

  auto r0 = mem.read_advance(512, 99);
  CHECK(r0.words == counting_words(0, 512));
  REQUIRE(r0.irq.has_value());
  CHECK(r0.irq->kind == InterruptKind::kHalfReached);
  CHECK(r0.irq->stream == StreamId::kDecoy);
  CHECK(r0.irq->tick == 99);
  CHECK(mem.owner(0) == HalfOwner::kHost);

  auto r1 = mem.read_advance(512, 100);
  CHECK(r1.words == counting_words(512, 512));
  REQUIRE(r1.irq.has_value());
  CHECK(r1.irq->kind == InterruptKind::kEndReached);
  CHECK(mem.read_ptr() == 0);

  // Both halves are back with the host until refilled.
  CHECK(error_code_of([&] { mem.read_advance(1); }) == ErrorCode::kUnderrun);
}

TEST_CASE("interrupt cadence is exactly one per half, none in between") {
  BlockMemory mem(StreamId::kPol, MemoryDirection::kTopDown, 1024);
  mem.host_write_half(0, counting_words(0, 512));
  mem.host_write_half(1, counting_words(512, 512));

  // 128-word reads: interrupts only on the 4th and 8th.
  for (int i = 1; i <= 8; ++i) {
    auto r = mem.read_advance(128);
    if (i == 4) {
      REQUIRE(r.irq.has_value());
      CHECK(r.irq->kind == InterruptKind::kHalfReached);
    } else if (i == 8) {
      REQUIRE(r.irq.has_value());
      CHECK(r.irq->kind == InterruptKind::kEndReached);
    } else {
      CHECK_FALSE(r.irq.has_value());
    }
  }
}

TEST_CASE("a read spanning the midpoint still hands half 0 over") {
  BlockMemory mem(StreamId::kPol, MemoryDirection::kTopDown, 1024);
  mem.host_write_half(0, counting_words(0, 512));
  mem.host_write_half(1, counting_words(512, 512));
  auto r = mem.read_advance(300);
  CHECK_FALSE(r.irq.has_value());
  r = mem.read_advance(300);  // crosses word 512
  REQUIRE(r.irq.has_value());
  CHECK(r.irq->kind == InterruptKind::kHalfReached);
  CHECK(r.words == counting_words(300, 300));
}

TEST_CASE("host refill of a half the emulator still owns is rejected") {
  BlockMemory mem(StreamId::kPol, MemoryDirection::kTopDown, 1024);
  mem.host_write_half(0, counting_words(0, 512));
  CHECK(error_code_of([&] { mem.host_write_half(0, counting_words(0, 512)); }) ==
        ErrorCode::kOwnershipViolation);
  // Reads capped at one half per call, and sized payloads enforced.
  CHECK(error_code_of([&] { mem.read_advance(513); }) == ErrorCode::kLengthError);
  CHECK(error_code_of([&] { mem.host_write_half(1, counting_words(0, 100)); }) ==
        ErrorCode::kLengthError);
}

TEST_CASE("reading into a host-owned half underruns instead of wrapping") {
  BlockMemory mem(StreamId::kPol, MemoryDirection::kTopDown, 1024);
  mem.host_write_half(0, counting_words(0, 512));
  mem.host_write_half(1, counting_words(512, 512));
  mem.read_advance(512);  // half 0 handed back to the host
  mem.read_advance(400);  // read pointer at 912
  // The next 200 words would run past the wrap into half 0.
  CHECK(error_code_of([&] { mem.read_advance(200); }) == ErrorCode::kUnderrun);
  // Refill half 0 and the same read succeeds across the wrap.
  mem.host_write_half(0, counting_words(2000, 512));
  auto r = mem.read_advance(200);
  REQUIRE(r.irq.has_value());
  CHECK(r.irq->kind == InterruptKind::kEndReached);
  auto expect = counting_words(912, 112);
  auto tail = counting_words(2000, 88);
  expect.insert(expect.end(), tail.begin(), tail.end());
  CHECK(r.words == expect);
}

TEST_CASE("one hundred refill swaps reproduce the source stream exactly") {
  BlockMemory mem(StreamId::kPol, MemoryDirection::kTopDown, 256);
  const std::size_t half = mem.half_words();
  std::vector<std::uint32_t> drained;
  std::uint32_t next = 0;
  mem.host_write_half(0, counting_words(next, half));
  next += static_cast<std::uint32_t>(half);
  mem.host_write_half(1, counting_words(next, half));
  next += static_cast<std::uint32_t>(half);

  for (int swap = 0; swap < 100; ++swap) {
    auto r = mem.read_advance(half);
    drained.insert(drained.end(), r.words.begin(), r.words.end());
    REQUIRE(r.irq.has_value());
    const int freed = r.irq->kind == InterruptKind::kHalfReached ? 0 : 1;
    mem.host_write_half(freed, counting_words(next, half));
    next += static_cast<std::uint32_t>(half);
  }
  CHECK(drained == counting_words(0, 100 * half));
}

TEST_CASE("a bottom-up memory accepts writes until the host lags") {
  BlockMemory mem(StreamId::kPol, MemoryDirection::kBottomUp, 256);
  const std::size_t half = mem.half_words();
  CHECK(mem.owner(0) == HalfOwner::kEmulator);

  auto irq = mem.write_advance(counting_words(0, half));
  REQUIRE(irq.has_value());
  CHECK(irq->kind == InterruptKind::kHalfReached);
  irq = mem.write_advance(counting_words(100, half));
  REQUIRE(irq.has_value());
  CHECK(irq->kind == InterruptKind::kEndReached);

  // Both halves now wait for the host; further writes must not clobber them.
  CHECK(error_code_of([&] { mem.write_advance(counting_words(0, 1)); }) ==
        ErrorCode::kOwnershipViolation);

  CHECK(mem.host_read_half(0) == counting_words(0, half));
  auto w = mem.write_advance(counting_words(200, half));
  REQUIRE(w.has_value());
  CHECK(w->kind == InterruptKind::kHalfReached);
  CHECK(mem.host_read_half(1) == counting_words(100, half));
  CHECK(mem.host_read_half(0) == counting_words(200, half));
}

TEST_CASE("direction misuse and bad geometry are rejected") {
  CHECK(error_code_of([] {
          BlockMemory(StreamId::kPol, MemoryDirection::kTopDown, 7);
        }) == ErrorCode::kInvalidConfig);
  BlockMemory down(StreamId::kPol, MemoryDirection::kTopDown, 8);
  CHECK(error_code_of([&] { down.host_read_half(0); }) ==
        ErrorCode::kInvalidConfig);
  CHECK(error_code_of([&] { down.write_advance(counting_words(0, 4)); }) ==
        ErrorCode::kInvalidConfig);
  BlockMemory up(StreamId::kPol, MemoryDirection::kBottomUp, 8);
  CHECK(error_code_of([&] { up.read_advance(1); }) == ErrorCode::kInvalidConfig);
  CHECK(error_code_of([&] { up.host_write_half(0, counting_words(0, 4)); }) ==
        ErrorCode::kInvalidConfig);
}
