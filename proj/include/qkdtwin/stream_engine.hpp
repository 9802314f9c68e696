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
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "qkdtwin/block_memory.hpp"
#include "qkdtwin/interrupts.hpp"

namespace qkdtwin {

struct RingBufferConfig {
  /// One staging block; ten of them make the 187.5 MiB per-stream buffer.
  std::size_t block_bytes = 19'660'800;
  std::size_t n_blocks = 10;
  /// One feed transfer = half the block memory, in bytes.
  std::size_t chunk_bytes = 65'536;

  std::size_t total_bytes() const { return block_bytes * n_blocks; }
  std::size_t chunks_per_block() const { return block_bytes / chunk_bytes; }
  void validate() const;
};

enum class BlockState : std::uint8_t { kEmpty, kFilling, kReady, kReading };

/// Single-producer/single-consumer staging ring between the transport
/// ingest role and the feed role. Blocks are claimed, filled and consumed
/// strictly in sequence-number order; a block is recycled the moment its
/// last chunk has been read out.
class BlockRing {
 public:
  BlockRing(StreamId stream, RingBufferConfig cfg);

  StreamId stream() const { return stream_; }
  const RingBufferConfig& config() const { return cfg_; }

  /// Ingest side. begin_fill claims the next empty block for writing
  /// (sequence numbers must arrive contiguously) and returns its storage;
  /// complete_fill publishes it. ingest_block does claim+copy+publish in
  /// one call.
  std::span<std::uint8_t> begin_fill(std::uint64_t seq);
  void complete_fill(std::uint64_t seq);
  void ingest_block(std::uint64_t seq, std::span<const std::uint8_t> payload);
  /// Flow control for the transport reader: true once an empty block
  /// exists, false if stop was raised first.
  bool wait_space(const std::atomic<bool>& stop);

  /// Feed side: copies exactly chunk_bytes into out, in FIFO order.
  /// Returns the block sequence number when this chunk drained a block.
  /// Throws Underrun when no filled data is available.
  std::optional<std::uint64_t> read_chunk(std::span<std::uint8_t> out);
  bool wait_chunk(const std::atomic<bool>& stop);

  /// Blocks currently holding data (kReady or kReading).
  std::size_t occupancy() const;
  std::uint64_t ingested_blocks() const;
  std::uint64_t consumed_blocks() const;
  BlockState state_of(std::uint64_t seq) const;

 private:
  struct Block {
    BlockState state = BlockState::kEmpty;
    std::uint64_t seq = 0;
  };

  StreamId stream_;
  RingBufferConfig cfg_;
  std::vector<std::uint8_t> store_;
  std::vector<Block> blocks_;
  mutable std::mutex mutex_;
  std::condition_variable space_cv_;
  std::condition_variable data_cv_;
  std::uint64_t next_ingest_ = 0;   // seq the ingest side fills next
  std::uint64_t next_consume_ = 0;  // seq the feed side drains next
  std::size_t read_offset_ = 0;     // bytes already read from next_consume_
};

/// Feed role for one stream: serves the block memory refill interrupts
/// from the staging ring and turns block completions into refill requests.
class StreamEngine {
 public:
  StreamEngine(StreamId stream, const RingBufferConfig& cfg, BlockMemory& mem);

  StreamId stream() const { return stream_; }
  BlockRing& ring() { return ring_; }
  const BlockRing& ring() const { return ring_; }

  /// Handles one refill interrupt: HALF_REACHED refills half 0,
  /// END_REACHED refills half 1. Returns the sequence number of a block
  /// this feed drained, if any. Throws Underrun when the ring is dry.
  std::optional<std::uint64_t> feed_chunk(const InterruptEvent& irq);

  /// Fills both memory halves before the clock starts. Returns the
  /// sequence numbers of any blocks these two feeds drained (possible
  /// when a block is one or two chunks long), so the caller can request
  /// their refills just like for feed_chunk.
  std::vector<std::uint64_t> feed_initial();

  /// Blocks until the staging ring is completely full (the startup policy:
  /// transmission only starts from a full buffer). Throws Timeout.
  void wait_preloaded(std::chrono::milliseconds timeout) const;
  bool preloaded() const;

  /// The refill protocol. On startup the board asks for the first
  /// n_blocks; from then on, consuming block k requests block
  /// k + n_blocks, keeping the outstanding window exactly the ring size.
  std::vector<std::uint64_t> startup_requests() const;
  /// Maps a consumed block to the next request, once. Duplicate
  /// notifications for an already-handled block return nothing.
  std::optional<std::uint64_t> request_refill(std::uint64_t consumed_seq);

  std::uint64_t feeds_total() const { return feeds_total_; }

 private:
  StreamId stream_;
  BlockMemory& mem_;
  BlockRing ring_;
  std::vector<std::uint8_t> chunk_buf_;
  std::vector<std::uint32_t> word_buf_;
  std::uint64_t feeds_total_ = 0;
  std::uint64_t refill_floor_ = 0;  // consumed seqs below this were handled
};

/// The doubled transmitter path: identical engines for the polarization
/// and decoy streams.
struct StreamPair {
  StreamEngine pol;
  StreamEngine decoy;

  StreamPair(const RingBufferConfig& cfg, BlockMemory& pol_mem,
             BlockMemory& decoy_mem)
      : pol(StreamId::kPol, cfg, pol_mem),
        decoy(StreamId::kDecoy, cfg, decoy_mem) {}
};

}  // namespace qkdtwin
