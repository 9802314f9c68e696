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

#include "qkdtwin/block_memory.hpp"

#include <algorithm>
#include <cstring>

namespace qkdtwin {

BlockMemory::BlockMemory(StreamId stream, MemoryDirection direction,
                         std::size_t total_words)
    : stream_(stream), direction_(direction), words_(total_words, 0) {
  if (total_words < 2 || total_words % 2 != 0) {
    raise(ErrorCode::kInvalidConfig, "total_words must be even and >= 2");
  }
  // Top-down starts with both halves empty and waiting for the host to fill
  // them; bottom-up starts with both halves free for the emulator to fill.
  const HalfOwner initial = direction == MemoryDirection::kTopDown
                                ? HalfOwner::kHost
                                : HalfOwner::kEmulator;
  owner_ = {initial, initial};
}

HalfOwner BlockMemory::owner(int half) const {
  std::lock_guard lock(mutex_);
  return owner_[half];
}

std::size_t BlockMemory::read_ptr() const {
  std::lock_guard lock(mutex_);
  return read_ptr_;
}

std::size_t BlockMemory::write_ptr() const {
  std::lock_guard lock(mutex_);
  return write_ptr_;
}

std::size_t BlockMemory::owned_run(std::size_t ptr, HalfOwner who) const {
  const std::size_t half = half_words();
  const std::size_t total = words_.size();
  std::size_t run = 0;
  std::size_t p = ptr;
  // Rest of the current half plus, if also owned, the following half. Reads
  // and writes are capped at one half per call, so two segments suffice.
  for (int seg = 0; seg < 2; ++seg) {
    const int h = p < half ? 0 : 1;
    if (owner_[h] != who) break;
    const std::size_t seg_end = (h == 0) ? half : total;
    run += seg_end - p;
    p = (seg_end == total) ? 0 : seg_end;
  }
  return run;
}

std::optional<InterruptEvent> BlockMemory::advance_pointer(std::size_t& ptr,
                                                           std::size_t nwords,
                                                           std::uint64_t tick) {
  const std::size_t half = half_words();
  const std::size_t total = words_.size();
  const std::size_t before = ptr;
  std::size_t after = before + nwords;
  std::optional<InterruptEvent> irq;
  if (before < half && after >= half) {
    // First half fully consumed/produced: hand it to the host.
    owner_[0] = HalfOwner::kHost;
    irq = InterruptEvent{InterruptKind::kHalfReached, stream_, tick};
  }
  if (after >= total) {
    after -= total;
    owner_[1] = HalfOwner::kHost;
    irq = InterruptEvent{InterruptKind::kEndReached, stream_, tick};
  }
  ptr = after;
  return irq;
}

void BlockMemory::host_write_half(int half, std::span<const std::uint32_t> payload) {
  if (direction_ != MemoryDirection::kTopDown) {
    raise(ErrorCode::kInvalidConfig, "host_write_half requires top-down direction");
  }
  if (half != 0 && half != 1) raise(ErrorCode::kInvalidConfig, "half must be 0 or 1");
  if (payload.size() != half_words()) {
    raise(ErrorCode::kLengthError,
          "payload holds " + std::to_string(payload.size()) + " words, half needs " +
              std::to_string(half_words()));
  }
  {
    std::lock_guard lock(mutex_);
    if (owner_[half] != HalfOwner::kHost) {
      raise(ErrorCode::kOwnershipViolation,
            "half " + std::to_string(half) + " is being read by the emulator");
    }
    std::copy(payload.begin(), payload.end(),
              words_.begin() + static_cast<std::ptrdiff_t>(half * half_words()));
    owner_[half] = HalfOwner::kEmulator;
  }
  cv_.notify_all();
}

std::vector<std::uint32_t> BlockMemory::host_read_half(int half) {
  if (direction_ != MemoryDirection::kBottomUp) {
    raise(ErrorCode::kInvalidConfig, "host_read_half requires bottom-up direction");
  }
  if (half != 0 && half != 1) raise(ErrorCode::kInvalidConfig, "half must be 0 or 1");
  std::vector<std::uint32_t> out(half_words());
  {
    std::lock_guard lock(mutex_);
    if (owner_[half] != HalfOwner::kHost) {
      raise(ErrorCode::kOwnershipViolation,
            "half " + std::to_string(half) + " is still being written");
    }
    const auto begin = words_.begin() + static_cast<std::ptrdiff_t>(half * half_words());
    std::copy(begin, begin + static_cast<std::ptrdiff_t>(half_words()), out.begin());
    owner_[half] = HalfOwner::kEmulator;
  }
  cv_.notify_all();
  return out;
}

BlockMemory::ReadResult BlockMemory::read_advance(std::size_t nwords,
                                                  std::uint64_t tick) {
  ReadResult result;
  result.words.resize(nwords);
  result.irq = read_advance_into(result.words, tick);
  return result;
}

std::optional<InterruptEvent> BlockMemory::read_advance_into(
    std::span<std::uint32_t> out, std::uint64_t tick) {
  if (direction_ != MemoryDirection::kTopDown) {
    raise(ErrorCode::kInvalidConfig, "read_advance requires top-down direction");
  }
  const std::size_t nwords = out.size();
  if (nwords == 0) return std::nullopt;
  if (nwords > half_words()) {
    raise(ErrorCode::kLengthError, "read request exceeds one half");
  }
  std::lock_guard lock(mutex_);
  if (owned_run(read_ptr_, HalfOwner::kEmulator) < nwords) {
    raise(ErrorCode::kUnderrun,
          std::string("read would enter a host-owned half (stream ") +
              to_string(stream_) + ")");
  }
  const std::size_t total = words_.size();
  for (std::size_t i = 0; i < nwords; ++i) {
    out[i] = words_[(read_ptr_ + i) % total];
  }
  auto irq = advance_pointer(read_ptr_, nwords, tick);
  if (irq) cv_.notify_all();
  return irq;
}

bool BlockMemory::wait_readable(std::size_t nwords, const std::atomic<bool>& stop) {
  std::unique_lock lock(mutex_);
  while (owned_run(read_ptr_, HalfOwner::kEmulator) < nwords) {
    if (stop.load(std::memory_order_relaxed)) return false;
    cv_.wait_for(lock, std::chrono::milliseconds(5));
  }
  return true;
}

std::optional<InterruptEvent> BlockMemory::write_advance(
    std::span<const std::uint32_t> words, std::uint64_t tick) {
  if (direction_ != MemoryDirection::kBottomUp) {
    raise(ErrorCode::kInvalidConfig, "write_advance requires bottom-up direction");
  }
  const std::size_t nwords = words.size();
  if (nwords == 0) return std::nullopt;
  if (nwords > half_words()) {
    raise(ErrorCode::kLengthError, "write request exceeds one half");
  }
  std::lock_guard lock(mutex_);
  if (owned_run(write_ptr_, HalfOwner::kEmulator) < nwords) {
    raise(ErrorCode::kOwnershipViolation,
          std::string("write would enter a half not yet drained by the host (stream ") +
              to_string(stream_) + ")");
  }
  const std::size_t total = words_.size();
  for (std::size_t i = 0; i < nwords; ++i) {
    words_[(write_ptr_ + i) % total] = words[i];
  }
  auto irq = advance_pointer(write_ptr_, nwords, tick);
  if (irq) cv_.notify_all();
  return irq;
}

bool BlockMemory::wait_writable(std::size_t nwords, const std::atomic<bool>& stop) {
  std::unique_lock lock(mutex_);
  while (owned_run(write_ptr_, HalfOwner::kEmulator) < nwords) {
    if (stop.load(std::memory_order_relaxed)) return false;
    cv_.wait_for(lock, std::chrono::milliseconds(5));
  }
  return true;
}

std::size_t BlockMemory::readable_words() const {
  std::lock_guard lock(mutex_);
  return owned_run(read_ptr_, HalfOwner::kEmulator);
}

}  // namespace qkdtwin
