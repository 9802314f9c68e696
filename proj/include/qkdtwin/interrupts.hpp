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
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>

namespace qkdtwin {

/// The two doubled data paths: one carries polarization codes, the other
/// decoy (intensity) codes.
enum class StreamId : std::uint8_t { kPol = 0, kDecoy = 1 };

inline const char* to_string(StreamId id) noexcept {
  return id == StreamId::kPol ? "pol" : "decoy";
}

enum class InterruptKind : std::uint8_t {
  kHalfReached,    // reader/writer crossed the midpoint of the block memory
  kEndReached,     // reader/writer wrapped at the end of the block memory
  kBlockConsumed,  // feed role finished one staging block
  kTriggerReset,   // external trigger: discard all sampled random data
};

inline const char* to_string(InterruptKind kind) noexcept {
  switch (kind) {
    case InterruptKind::kHalfReached: return "HALF_REACHED";
    case InterruptKind::kEndReached: return "END_REACHED";
    case InterruptKind::kBlockConsumed: return "BLOCK_CONSUMED";
    case InterruptKind::kTriggerReset: return "TRIGGER_RESET";
  }
  return "?";
}

/// Interrupts are modeled as explicit events on an ordered per-stream queue
/// rather than level-sensitive lines, which makes runs deterministic and
/// replayable.
struct InterruptEvent {
  InterruptKind kind;
  StreamId stream;
  std::uint64_t tick = 0;
  /// Sequence payload for kBlockConsumed.
  std::uint64_t seq = 0;
  friend bool operator==(const InterruptEvent&, const InterruptEvent&) = default;
};

/// Thread-safe FIFO carrying interrupt events between the emulator context
/// and the feed role.
class InterruptQueue {
 public:
  void push(const InterruptEvent& ev) {
    {
      std::lock_guard lock(mutex_);
      queue_.push_back(ev);
    }
    cv_.notify_all();
  }

  /// Blocks up to `timeout`; returns nullopt on timeout or when closed and
  /// drained.
  std::optional<InterruptEvent> pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    InterruptEvent ev = queue_.front();
    queue_.pop_front();
    return ev;
  }

  std::optional<InterruptEvent> try_pop() {
    std::lock_guard lock(mutex_);
    if (queue_.empty()) return std::nullopt;
    InterruptEvent ev = queue_.front();
    queue_.pop_front();
    return ev;
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return queue_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<InterruptEvent> queue_;
  bool closed_ = false;
};

}  // namespace qkdtwin
