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

#include "qkdtwin/retention.hpp"

#include <algorithm>
#include <chrono>

#include "qkdtwin/errors.hpp"

namespace qkdtwin {

namespace {
constexpr auto kPoll = std::chrono::milliseconds(5);
}

void RetentionConfig::validate() const {
  if (chunk_bytes == 0 || chunk_bytes % 4 != 0) {
    raise(ErrorCode::kInvalidConfig, "chunk_bytes must be a positive multiple of 4");
  }
  if (n_chunks < 2) {
    raise(ErrorCode::kInvalidConfig, "need at least 2 chunks");
  }
}

RetentionBuffer::RetentionBuffer(StreamId stream, RetentionConfig cfg)
    : stream_(stream), cfg_(cfg) {
  cfg_.validate();
  store_.resize(cfg_.chunk_bytes * cfg_.n_chunks);
  slots_.resize(cfg_.n_chunks);
}

std::span<std::uint8_t> RetentionBuffer::acquire_write(
    const std::atomic<bool>& stop) {
  std::unique_lock lock(mutex_);
  if (write_open_) {
    raise(ErrorCode::kNotReady, "previous acquire_write not committed");
  }
  const std::size_t idx = next_produce_ % cfg_.n_chunks;
  while (slots_[idx].state != ChunkState::kWritable &&
         slots_[idx].state != ChunkState::kReleased) {
    if (stop.load(std::memory_order_relaxed)) return {};
    producer_cv_.wait_for(lock, kPoll);
  }
  write_open_ = true;
  return std::span(store_).subspan(idx * cfg_.chunk_bytes, cfg_.chunk_bytes);
}

void RetentionBuffer::commit_write() {
  {
    std::lock_guard lock(mutex_);
    if (!write_open_) {
      raise(ErrorCode::kNotReady, "commit_write without acquire_write");
    }
    const std::size_t idx = next_produce_ % cfg_.n_chunks;
    slots_[idx].state = ChunkState::kFilled;
    slots_[idx].seq = next_produce_;
    slots_[idx].ever_used = true;
    ++next_produce_;
    write_open_ = false;
  }
  server_cv_.notify_all();
}

std::span<const std::uint8_t> RetentionBuffer::chunk_for_send(
    std::uint64_t seq, const std::atomic<bool>& stop) {
  std::unique_lock lock(mutex_);
  const std::size_t idx = seq % cfg_.n_chunks;
  for (;;) {
    if (seq < release_floor_) {
      raise(ErrorCode::kChunkAlreadyReleased,
            "block " + std::to_string(seq) + " was already recycled");
    }
    const Slot& s = slots_[idx];
    if (s.ever_used && s.seq == seq &&
        (s.state == ChunkState::kFilled ||
         s.state == ChunkState::kSentPendingSift)) {
      return std::span<const std::uint8_t>(store_).subspan(
          idx * cfg_.chunk_bytes, cfg_.chunk_bytes);
    }
    if (stop.load(std::memory_order_relaxed)) return {};
    server_cv_.wait_for(lock, kPoll);
  }
}

std::span<const std::uint8_t> RetentionBuffer::try_chunk_for_send(
    std::uint64_t seq) {
  std::lock_guard lock(mutex_);
  if (seq < release_floor_) {
    raise(ErrorCode::kChunkAlreadyReleased,
          "block " + std::to_string(seq) + " was already recycled");
  }
  const std::size_t idx = seq % cfg_.n_chunks;
  const Slot& s = slots_[idx];
  if (s.ever_used && s.seq == seq &&
      (s.state == ChunkState::kFilled ||
       s.state == ChunkState::kSentPendingSift)) {
    return std::span<const std::uint8_t>(store_).subspan(idx * cfg_.chunk_bytes,
                                                         cfg_.chunk_bytes);
  }
  raise(ErrorCode::kBufferDry, "block " + std::to_string(seq) +
                                   " not produced yet (producer behind demand)");
}

void RetentionBuffer::mark_sent(std::uint64_t seq) {
  bool recycled = false;
  {
    std::lock_guard lock(mutex_);
    if (seq < release_floor_) {
      raise(ErrorCode::kChunkAlreadyReleased,
            "block " + std::to_string(seq) + " was already recycled");
    }
    const std::size_t idx = seq % cfg_.n_chunks;
    Slot& s = slots_[idx];
    if (!s.ever_used || s.seq != seq) {
      raise(ErrorCode::kNotReady, "block " + std::to_string(seq) + " not produced");
    }
    if (s.state == ChunkState::kFilled) {
      s.state = ChunkState::kSentPendingSift;
      ++sent_chunks_;
      max_sent_end_ = std::max(max_sent_end_, seq + 1);
      if (!cfg_.retain_for_sifting) {
        s.state = ChunkState::kReleased;
        ++released_chunks_;
        while (release_floor_ < next_produce_) {
          const Slot& f = slots_[release_floor_ % cfg_.n_chunks];
          if (!(f.ever_used && f.seq == release_floor_ &&
                f.state == ChunkState::kReleased)) {
            break;
          }
          ++release_floor_;
        }
        recycled = true;
      }
    }
    // kSentPendingSift: a resend, nothing to update.
  }
  if (recycled) producer_cv_.notify_all();
}

std::uint8_t RetentionBuffer::symbol_at(std::uint64_t slot) const {
  std::lock_guard lock(mutex_);
  const std::size_t spc = cfg_.symbols_per_chunk();
  const std::uint64_t seq = slot / spc;
  if (seq >= max_sent_end_) {
    raise(ErrorCode::kIndexOutOfRange,
          "slot " + std::to_string(slot) + " beyond sent range");
  }
  if (seq < release_floor_) {
    raise(ErrorCode::kChunkAlreadyReleased,
          "slot " + std::to_string(slot) + " was already sifted and recycled");
  }
  const std::size_t idx = seq % cfg_.n_chunks;
  const Slot& s = slots_[idx];
  if (!s.ever_used || s.seq != seq || s.state != ChunkState::kSentPendingSift) {
    raise(ErrorCode::kChunkAlreadyReleased,
          "slot " + std::to_string(slot) + " is not retained");
  }
  const std::size_t off = slot % spc;
  const std::uint8_t byte = store_[idx * cfg_.chunk_bytes + off / 4];
  return static_cast<std::uint8_t>((byte >> (2 * (off % 4))) & 3u);
}

void RetentionBuffer::release_through(std::uint64_t slot) {
  bool any = false;
  {
    std::lock_guard lock(mutex_);
    const std::size_t spc = cfg_.symbols_per_chunk();
    while ((release_floor_ + 1) * spc <= slot) {
      Slot& s = slots_[release_floor_ % cfg_.n_chunks];
      if (!(s.ever_used && s.seq == release_floor_ &&
            s.state == ChunkState::kSentPendingSift)) {
        break;
      }
      s.state = ChunkState::kReleased;
      ++released_chunks_;
      ++release_floor_;
      any = true;
    }
  }
  if (any) producer_cv_.notify_all();
}

std::uint64_t RetentionBuffer::produced_chunks() const {
  std::lock_guard lock(mutex_);
  return next_produce_;
}

std::uint64_t RetentionBuffer::sent_chunks() const {
  std::lock_guard lock(mutex_);
  return sent_chunks_;
}

std::uint64_t RetentionBuffer::released_chunks() const {
  std::lock_guard lock(mutex_);
  return released_chunks_;
}

std::uint64_t RetentionBuffer::watermark_slot() const {
  std::lock_guard lock(mutex_);
  return release_floor_ * cfg_.symbols_per_chunk();
}

std::uint64_t RetentionBuffer::sent_slots() const {
  std::lock_guard lock(mutex_);
  return max_sent_end_ * cfg_.symbols_per_chunk();
}

ChunkState RetentionBuffer::state_of(std::uint64_t seq) const {
  std::lock_guard lock(mutex_);
  if (seq < release_floor_) return ChunkState::kReleased;
  const Slot& s = slots_[seq % cfg_.n_chunks];
  if (!s.ever_used || s.seq != seq) return ChunkState::kWritable;
  return s.state;
}

SiftSelector::SiftSelector(RetentionBuffer& pol, RetentionBuffer& decoy)
    : pol_(pol), decoy_(decoy) {}

std::vector<SiftedPair> SiftSelector::select(const DetectionReport& report) {
  if (report.slot_end < report.slot_begin) {
    raise(ErrorCode::kInvalidConfig, "report range is inverted");
  }
  if (report.slot_begin < coverage_) {
    raise(ErrorCode::kChunkAlreadyReleased,
          "report re-covers slots before " + std::to_string(coverage_));
  }
  const std::uint64_t sent =
      std::min(pol_.sent_slots(), decoy_.sent_slots());
  if (report.slot_end > sent) {
    raise(ErrorCode::kIndexOutOfRange, "report covers slots beyond sent range");
  }
  std::vector<SiftedPair> pairs;
  pairs.reserve(report.indices.size());
  std::uint64_t prev = 0;
  bool first = true;
  for (std::uint64_t slot : report.indices) {
    if (!first && slot <= prev) {
      raise(ErrorCode::kInvalidConfig, "detection indices must be increasing");
    }
    if (slot < report.slot_begin || slot >= report.slot_end) {
      raise(ErrorCode::kIndexOutOfRange,
            "detection index outside the report's covering range");
    }
    pairs.push_back(
        SiftedPair{slot, pol_.symbol_at(slot), decoy_.symbol_at(slot)});
    prev = slot;
    first = false;
  }
  coverage_ = std::max(coverage_, report.slot_end);
  pol_.release_through(coverage_);
  decoy_.release_through(coverage_);
  sifted_ += pairs.size();
  return pairs;
}

}  // namespace qkdtwin
