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

#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "qkdtwin/errors.hpp"
#include "qkdtwin/interrupts.hpp"

namespace qkdtwin {

enum class HalfOwner : std::uint8_t { kHost, kEmulator };

/// Dataflow direction of the memory. Top-down: the host refills halves that
/// the emulator drains (transmitter). Bottom-up: the emulator fills halves
/// that the host drains (receiver / random-number acquisition).
enum class MemoryDirection : std::uint8_t { kTopDown, kBottomUp };

/// Word-addressed dual-half block memory with half/end interrupt emission.
///
/// The memory is split into two halves whose ownership alternates between
/// the host side and the emulator side. Whenever the emulator pointer
/// crosses the midpoint or wraps at the end, the crossed half's ownership
/// flips to the host and a HALF_REACHED / END_REACHED event is returned so
/// the host can refill (top-down) or drain (bottom-up) it.
///
/// All methods are thread-safe; host calls and emulator calls may come from
/// different threads. Ownership flags are the only shared state and they
/// are updated under the same lock that emits the event.
class BlockMemory {
 public:
  /// 32768 32-bit words = 1 Mibit per stream.
  static constexpr std::size_t kDefaultTotalWords = 32768;

  explicit BlockMemory(StreamId stream,
                       MemoryDirection direction = MemoryDirection::kTopDown,
                       std::size_t total_words = kDefaultTotalWords);

  StreamId stream() const noexcept { return stream_; }
  MemoryDirection direction() const noexcept { return direction_; }
  std::size_t total_words() const noexcept { return words_.size(); }
  std::size_t half_words() const noexcept { return words_.size() / 2; }
  std::size_t half_bytes() const noexcept { return half_words() * 4; }

  HalfOwner owner(int half) const;
  std::size_t read_ptr() const;
  std::size_t write_ptr() const;

  // --- host side (top-down) -------------------------------------------------

  /// Fills one host-owned half in full and hands it to the emulator.
  void host_write_half(int half, std::span<const std::uint32_t> payload);

  // --- host side (bottom-up) ------------------------------------------------

  /// Drains one host-owned half in full and hands it back to the emulator.
  std::vector<std::uint32_t> host_read_half(int half);

  // --- emulator side ---------------------------------------------------------

  struct ReadResult {
    std::vector<std::uint32_t> words;
    std::optional<InterruptEvent> irq;
  };

  /// Reads `nwords` (at most one half) in pointer order. Throws Underrun if
  /// any requested word lies in a host-owned half.
  ReadResult read_advance(std::size_t nwords, std::uint64_t tick = 0);

  /// Variant that copies into caller storage and avoids allocation; meant
  /// for the per-word hot path. Same contract as read_advance.
  std::optional<InterruptEvent> read_advance_into(std::span<std::uint32_t> out,
                                                  std::uint64_t tick = 0);

  /// Waits until the next `nwords` are emulator-owned. Returns false if
  /// `stop` became true first. Used by clock-gated (as-fast-as-possible)
  /// runs where the clock pauses instead of underrunning.
  bool wait_readable(std::size_t nwords, const std::atomic<bool>& stop);

  /// Appends words at the write pointer (bottom-up direction). Throws
  /// OwnershipViolation if the target half is still host-owned (the host
  /// has not drained it yet).
  std::optional<InterruptEvent> write_advance(std::span<const std::uint32_t> words,
                                              std::uint64_t tick = 0);

  bool wait_writable(std::size_t nwords, const std::atomic<bool>& stop);

  /// Emulator-owned words ahead of the read pointer (contiguous run).
  std::size_t readable_words() const;

 private:
  // Requires lock held. Returns how many words starting at `ptr` are owned
  // by `who` before hitting a half with different ownership (capped at one
  // full buffer).
  std::size_t owned_run(std::size_t ptr, HalfOwner who) const;
  std::optional<InterruptEvent> advance_pointer(std::size_t& ptr, std::size_t nwords,
                                                std::uint64_t tick);

  StreamId stream_;
  MemoryDirection direction_;
  std::vector<std::uint32_t> words_;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::array<HalfOwner, 2> owner_;
  std::size_t read_ptr_ = 0;
  std::size_t write_ptr_ = 0;
};

}  // namespace qkdtwin
