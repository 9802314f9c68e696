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
#include <span>
#include <vector>

#include "qkdtwin/interrupts.hpp"

namespace qkdtwin {

/// One transfer block of packed symbols; also the retention chunk size, so
/// a block request maps to exactly one chunk.
inline constexpr std::size_t kDefaultChunkBytes = 19'660'800;

struct RetentionConfig {
  std::size_t chunk_bytes = kDefaultChunkBytes;
  /// 40 chunks of packed symbols per stream: four times the board ring,
  /// roughly a minute of one stream's traffic at full rate.
  std::size_t n_chunks = 40;
  /// When false, chunks are recycled as soon as they are sent. Used by
  /// runs that have no sifting consumer.
  bool retain_for_sifting = true;

  std::size_t symbols_per_chunk() const { return chunk_bytes * 4; }
  void validate() const;
};

enum class ChunkState : std::uint8_t {
  kWritable,         // free for the producer (initial, or recycled)
  kFilled,           // produced, not yet sent
  kSentPendingSift,  // sent to the board, symbols retained for sifting
  kReleased,         // sifting done; producer may claim it again
};

/// Per-stream circular store of produced symbols, shared by the three
/// source-side roles. The producer claims chunks in ring order, the block
/// server hands them to the transport keyed by block sequence number, and
/// the sifting consumer reads individual symbols back until it releases a
/// chunk for rewriting. Counting permits stop the producer from ever
/// overwriting a chunk that still awaits sifting.
class RetentionBuffer {
 public:
  RetentionBuffer(StreamId stream, RetentionConfig cfg);

  StreamId stream() const { return stream_; }
  const RetentionConfig& config() const { return cfg_; }

  /// Producer side. acquire_write blocks until the next ring chunk is
  /// recyclable and returns its payload span (empty span when stop was
  /// raised). commit_write publishes it as block `seq` = number of chunks
  /// committed so far.
  std::span<std::uint8_t> acquire_write(const std::atomic<bool>& stop);
  void commit_write();

  /// Block-server side: payload of block `seq`, waiting for the producer
  /// if necessary (empty span when stop was raised). Resending a block
  /// that is still retained returns the identical payload.
  std::span<const std::uint8_t> chunk_for_send(std::uint64_t seq,
                                               const std::atomic<bool>& stop);
  /// Nonblocking form; throws BufferDry when the block is not produced yet.
  std::span<const std::uint8_t> try_chunk_for_send(std::uint64_t seq);
  /// First send of block `seq`: kFilled becomes kSentPendingSift (or is
  /// recycled immediately when retain_for_sifting is off). Resends keep
  /// the state unchanged.
  void mark_sent(std::uint64_t seq);

  /// Sifting side: the 2-bit code transmitted at the given slot index.
  std::uint8_t symbol_at(std::uint64_t slot) const;
  /// Recycles every sent chunk that lies entirely below `slot`.
  void release_through(std::uint64_t slot);

  std::uint64_t produced_chunks() const;
  std::uint64_t sent_chunks() const;
  std::uint64_t released_chunks() const;
  /// Slots [watermark, sent_slots) are still retained for sifting.
  std::uint64_t watermark_slot() const;
  std::uint64_t sent_slots() const;
  ChunkState state_of(std::uint64_t seq) const;

 private:
  struct Slot {
    ChunkState state = ChunkState::kWritable;
    std::uint64_t seq = 0;  // valid unless state == kWritable and never used
    bool ever_used = false;
  };

  StreamId stream_;
  RetentionConfig cfg_;
  std::vector<std::uint8_t> store_;
  std::vector<Slot> slots_;
  mutable std::mutex mutex_;
  std::condition_variable producer_cv_;
  std::condition_variable server_cv_;
  std::uint64_t next_produce_ = 0;  // seq the producer will commit next
  bool write_open_ = false;
  std::uint64_t sent_chunks_ = 0;
  std::uint64_t released_chunks_ = 0;
  std::uint64_t release_floor_ = 0;  // all seqs below this are recycled
  std::uint64_t max_sent_end_ = 0;   // one past the highest seq ever sent
};

struct SiftedPair {
  std::uint64_t slot = 0;
  std::uint8_t pol_code = 0;
  std::uint8_t decoy_code = 0;
  friend bool operator==(const SiftedPair&, const SiftedPair&) = default;
};

/// Detection indices reported by the receiver, plus the slot range the
/// report covers (so fully covered chunks can be recycled even when no
/// detection landed in them). Outcomes never appear here.
struct DetectionReport {
  std::uint64_t slot_begin = 0;
  std::uint64_t slot_end = 0;  // exclusive
  std::vector<std::uint64_t> indices;
  std::vector<std::uint8_t> basis;  // optional, parallel to indices
};

/// Replays detection reports against the two retention buffers, returning
/// the transmitted symbol pairs at the detected slots and recycling chunks
/// the coverage has moved past.
class SiftSelector {
 public:
  SiftSelector(RetentionBuffer& pol, RetentionBuffer& decoy);

  std::vector<SiftedPair> select(const DetectionReport& report);

  std::uint64_t sifted_count() const { return sifted_; }
  std::uint64_t coverage_watermark() const { return coverage_; }

 private:
  RetentionBuffer& pol_;
  RetentionBuffer& decoy_;
  std::uint64_t coverage_ = 0;  // next slot index a report may start at
  std::uint64_t sifted_ = 0;
};

}  // namespace qkdtwin
