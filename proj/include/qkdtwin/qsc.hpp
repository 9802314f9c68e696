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
#include <cstdint>
#include <optional>
#include <vector>

#include "qkdtwin/block_memory.hpp"
#include "qkdtwin/encoding.hpp"
#include "qkdtwin/interrupts.hpp"
#include "qkdtwin/util.hpp"

namespace qkdtwin {

/// Consumer of the emitted pulse schedule. on_frame runs on the emulator
/// thread, so implementations must be cheap or buffer internally.
class FrameSink {
 public:
  virtual ~FrameSink() = default;
  virtual void on_frame(const PulseFrame& frame) = 0;
};

struct EmuCounters {
  std::uint64_t slots = 0;
  std::uint64_t vacuum_slots = 0;
  std::uint64_t words_pol = 0;
  std::uint64_t words_decoy = 0;
};

struct QscStepResult {
  PulseFrame frame;
  std::optional<InterruptEvent> pol_irq;
  std::optional<InterruptEvent> decoy_irq;
};

/// Clocked pulse generator. Drains the two block memories at one 2-bit
/// symbol per stream per slot (16 slots per 32-bit word) and emits the
/// per-slot pulse schedule. Words are consumed low bits first, matching
/// pack_symbols plus little-endian byte-to-word packing.
///
/// Single-threaded by design: one caller owns step/advance, the way one
/// clock domain owns the read side of the memories.
class QStatesController {
 public:
  QStatesController(const ClockConfig& cfg, const ChannelOffsets& offsets,
                    SymbolPositionMaps maps = {});

  void start();
  void stop();
  bool running() const { return running_; }

  /// Runs a single slot. Fetches one word per stream when the shift
  /// registers run dry; throws Underrun if that word is not available.
  QscStepResult step(BlockMemory& pol_mem, BlockMemory& decoy_mem);

  /// Runs up to max_slots slots, blocking on the memories when they run
  /// dry. Frames go to sink when non-null; a null sink skips frame
  /// construction entirely (the fast path for throughput runs). Interrupts
  /// raised by consumption are pushed onto the queues when non-null.
  /// Returns the number of slots completed (less than max_slots only when
  /// stop_flag was raised).
  std::uint64_t advance(BlockMemory& pol_mem, BlockMemory& decoy_mem,
                        std::uint64_t max_slots, FrameSink* sink,
                        InterruptQueue* pol_irqs, InterruptQueue* decoy_irqs,
                        const std::atomic<bool>& stop_flag);

  const EmuCounters& counters() const { return counters_; }
  std::uint64_t slot_index() const { return counters_.slots; }

  /// Running digest of every word pulled from the given stream, in order.
  std::uint64_t consumed_hash(StreamId s) const;

  const ClockConfig& clock() const { return cfg_; }

 private:
  // Words fetched ahead of consumption per blocking fetch. Bounds how far
  // interrupt delivery can lead the emitted slot index.
  static constexpr std::size_t kPrefetchWords = 256;

  struct StreamState {
    std::uint32_t current = 0;
    std::vector<std::uint32_t> buf;
    std::size_t pos = 0;
    Fnv1a64 hash;
  };

  bool ensure_buffered(StreamState& st, BlockMemory& mem, std::size_t want,
                       std::uint64_t tick, bool blocking,
                       const std::atomic<bool>* stop_flag, InterruptQueue* irqs,
                       std::optional<InterruptEvent>* irq_out);

  ClockConfig cfg_;
  ChannelOffsets offsets_;
  SymbolPositionMaps maps_;
  bool running_ = false;
  unsigned symbols_left_ = 0;  // symbols still in both shift registers
  StreamState pol_;
  StreamState decoy_;
  EmuCounters counters_;
};

}  // namespace qkdtwin
