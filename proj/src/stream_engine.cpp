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

#include "qkdtwin/stream_engine.hpp"

#include <algorithm>
#include <cstring>
#include <thread>

#include "qkdtwin/errors.hpp"
#include "qkdtwin/util.hpp"

namespace qkdtwin {

namespace {
constexpr auto kPoll = std::chrono::milliseconds(5);
}

void RingBufferConfig::validate() const {
  if (block_bytes == 0 || chunk_bytes == 0 || n_blocks == 0) {
    raise(ErrorCode::kInvalidConfig, "ring sizes must be positive");
  }
  if (block_bytes % chunk_bytes != 0) {
    raise(ErrorCode::kInvalidConfig,
          "block_bytes must be a multiple of chunk_bytes");
  }
  if (chunk_bytes % 4 != 0) {
    raise(ErrorCode::kInvalidConfig, "chunk_bytes must be word aligned");
  }
}

BlockRing::BlockRing(StreamId stream, RingBufferConfig cfg)
    : stream_(stream), cfg_(cfg) {
  cfg_.validate();
  store_.resize(cfg_.total_bytes());
  blocks_.resize(cfg_.n_blocks);
}

std::span<std::uint8_t> BlockRing::begin_fill(std::uint64_t seq) {
  std::lock_guard lock(mutex_);
  if (seq != next_ingest_) {
    raise(ErrorCode::kSequenceGap,
          "expected block " + std::to_string(next_ingest_) + ", got " +
              std::to_string(seq));
  }
  Block& b = blocks_[seq % cfg_.n_blocks];
  if (b.state != BlockState::kEmpty) {
    raise(ErrorCode::kBufferFull,
          "no empty block for seq " + std::to_string(seq));
  }
  b.state = BlockState::kFilling;
  b.seq = seq;
  return std::span(store_).subspan((seq % cfg_.n_blocks) * cfg_.block_bytes,
                                   cfg_.block_bytes);
}

void BlockRing::complete_fill(std::uint64_t seq) {
  {
    std::lock_guard lock(mutex_);
    Block& b = blocks_[seq % cfg_.n_blocks];
    if (b.state != BlockState::kFilling || b.seq != seq) {
      raise(ErrorCode::kNotReady,
            "block " + std::to_string(seq) + " is not being filled");
    }
    b.state = BlockState::kReady;
    ++next_ingest_;
  }
  data_cv_.notify_all();
}

void BlockRing::ingest_block(std::uint64_t seq,
                             std::span<const std::uint8_t> payload) {
  if (payload.size() != cfg_.block_bytes) {
    raise(ErrorCode::kLengthError,
          "block payload is " + std::to_string(payload.size()) + " bytes, want " +
              std::to_string(cfg_.block_bytes));
  }
  auto dst = begin_fill(seq);
  std::memcpy(dst.data(), payload.data(), payload.size());
  complete_fill(seq);
}

bool BlockRing::wait_space(const std::atomic<bool>& stop) {
  std::unique_lock lock(mutex_);
  for (;;) {
    if (blocks_[next_ingest_ % cfg_.n_blocks].state == BlockState::kEmpty) {
      return true;
    }
    if (stop.load(std::memory_order_relaxed)) return false;
    space_cv_.wait_for(lock, kPoll);
  }
}

std::optional<std::uint64_t> BlockRing::read_chunk(std::span<std::uint8_t> out) {
  if (out.size() != cfg_.chunk_bytes) {
    raise(ErrorCode::kLengthError, "chunk reads must be exactly chunk_bytes");
  }
  std::optional<std::uint64_t> consumed;
  {
    std::lock_guard lock(mutex_);
    Block& b = blocks_[next_consume_ % cfg_.n_blocks];
    if (b.state == BlockState::kReady && b.seq == next_consume_) {
      b.state = BlockState::kReading;
    }
    if (b.state != BlockState::kReading || b.seq != next_consume_) {
      raise(ErrorCode::kUnderrun,
            std::string("staging ring is dry (stream ") + to_string(stream_) +
                ", block " + std::to_string(next_consume_) + ")");
    }
    const std::uint8_t* src = store_.data() +
                              (next_consume_ % cfg_.n_blocks) * cfg_.block_bytes +
                              read_offset_;
    std::memcpy(out.data(), src, cfg_.chunk_bytes);
    read_offset_ += cfg_.chunk_bytes;
    if (read_offset_ == cfg_.block_bytes) {
      b.state = BlockState::kEmpty;
      consumed = next_consume_;
      ++next_consume_;
      read_offset_ = 0;
    }
  }
  if (consumed) space_cv_.notify_all();
  return consumed;
}

bool BlockRing::wait_chunk(const std::atomic<bool>& stop) {
  std::unique_lock lock(mutex_);
  for (;;) {
    const Block& b = blocks_[next_consume_ % cfg_.n_blocks];
    if ((b.state == BlockState::kReady || b.state == BlockState::kReading) &&
        b.seq == next_consume_) {
      return true;
    }
    if (stop.load(std::memory_order_relaxed)) return false;
    data_cv_.wait_for(lock, kPoll);
  }
}

std::size_t BlockRing::occupancy() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const Block& b : blocks_) {
    if (b.state == BlockState::kReady || b.state == BlockState::kReading) ++n;
  }
  return n;
}

std::uint64_t BlockRing::ingested_blocks() const {
  std::lock_guard lock(mutex_);
  return next_ingest_;
}

std::uint64_t BlockRing::consumed_blocks() const {
  std::lock_guard lock(mutex_);
  return next_consume_;
}

BlockState BlockRing::state_of(std::uint64_t seq) const {
  std::lock_guard lock(mutex_);
  const Block& b = blocks_[seq % cfg_.n_blocks];
  if (b.seq != seq && b.state != BlockState::kEmpty) return BlockState::kEmpty;
  return b.state;
}

StreamEngine::StreamEngine(StreamId stream, const RingBufferConfig& cfg,
                           BlockMemory& mem)
    : stream_(stream), mem_(mem), ring_(stream, cfg) {
  if (cfg.chunk_bytes != mem.half_bytes()) {
    raise(ErrorCode::kInvalidConfig,
          "chunk_bytes (" + std::to_string(cfg.chunk_bytes) +
              ") must equal one memory half (" +
              std::to_string(mem.half_bytes()) + " bytes)");
  }
  chunk_buf_.resize(cfg.chunk_bytes);
  word_buf_.resize(cfg.chunk_bytes / 4);
}

std::optional<std::uint64_t> StreamEngine::feed_chunk(const InterruptEvent& irq) {
  if (irq.kind != InterruptKind::kHalfReached &&
      irq.kind != InterruptKind::kEndReached) {
    raise(ErrorCode::kInvalidConfig, "feed_chunk expects a half/end interrupt");
  }
  if (irq.stream != stream_) {
    raise(ErrorCode::kInvalidConfig, "interrupt for the wrong stream");
  }
  const int half = irq.kind == InterruptKind::kHalfReached ? 0 : 1;
  const auto consumed = ring_.read_chunk(chunk_buf_);
  words_from_bytes_le(chunk_buf_, word_buf_);
  mem_.host_write_half(half, word_buf_);
  ++feeds_total_;
  return consumed;
}

std::vector<std::uint64_t> StreamEngine::feed_initial() {
  std::vector<std::uint64_t> drained;
  for (int half = 0; half < 2; ++half) {
    if (auto consumed = ring_.read_chunk(chunk_buf_)) {
      drained.push_back(*consumed);
    }
    words_from_bytes_le(chunk_buf_, word_buf_);
    mem_.host_write_half(half, word_buf_);
    ++feeds_total_;
  }
  return drained;
}

void StreamEngine::wait_preloaded(std::chrono::milliseconds timeout) const {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (ring_.occupancy() < ring_.config().n_blocks) {
    if (std::chrono::steady_clock::now() >= deadline) {
      raise(ErrorCode::kTimeout,
            std::string("preload incomplete on stream ") + to_string(stream_) +
                ": " + std::to_string(ring_.occupancy()) + "/" +
                std::to_string(ring_.config().n_blocks) + " blocks");
    }
    std::this_thread::sleep_for(kPoll);
  }
}

bool StreamEngine::preloaded() const {
  return ring_.occupancy() == ring_.config().n_blocks;
}

std::vector<std::uint64_t> StreamEngine::startup_requests() const {
  std::vector<std::uint64_t> seqs(ring_.config().n_blocks);
  for (std::size_t i = 0; i < seqs.size(); ++i) seqs[i] = i;
  return seqs;
}

std::optional<std::uint64_t> StreamEngine::request_refill(
    std::uint64_t consumed_seq) {
  if (consumed_seq < refill_floor_) return std::nullopt;  // duplicate
  refill_floor_ = consumed_seq + 1;
  return consumed_seq + ring_.config().n_blocks;
}

}  // namespace qkdtwin
