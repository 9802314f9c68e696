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
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qkdtwin/bias.hpp"
#include "qkdtwin/command_session.hpp"
#include "qkdtwin/random_source.hpp"
#include "qkdtwin/retention.hpp"
#include "qkdtwin/tcp.hpp"
#include "qkdtwin/wire.hpp"

namespace qkdtwin {

struct SourceConfig {
  std::string board_addr = "127.0.0.1";
  std::uint16_t command_port = 7000;
  std::uint16_t pol_port = 7001;
  std::uint16_t decoy_port = 7002;

  SourceKind kind = SourceKind::kCsprng;
  double qrng_bits_per_second = 2e8;
  Seed256 seed{};
  BiasConfig bias{};

  /// Retention geometry; chunk_bytes must equal the board's block size so
  /// one retained chunk maps to one data frame.
  RetentionConfig retention{};

  /// Blocks to produce per stream; 0 keeps producing until shutdown.
  std::uint64_t produce_blocks = 0;

  /// Serving-role fault injection: pause the block server once, this many
  /// seconds after the board starts emitting, for stall_seconds. Negative
  /// stall_at_s disables it.
  double stall_at_s = -1.0;
  double stall_seconds = 0.0;

  std::string auth_token;
};

/// The PC side: produces biased symbol chunks into the retention buffers,
/// serves the board's block requests over the two data sockets, and turns
/// relayed detection reports into sifted pairs. The three roles run
/// concurrently on their own threads over the shared retention store.
class SourceTwin {
 public:
  explicit SourceTwin(SourceConfig cfg);
  ~SourceTwin();
  SourceTwin(const SourceTwin&) = delete;
  SourceTwin& operator=(const SourceTwin&) = delete;

  /// Dials the command socket (completing the token handshake when one is
  /// configured) and then both data sockets, in that order.
  void connect();

  /// Board control passthrough over the command session.
  std::string set_board_params(const std::string& json);
  std::string board_status();
  void start_board();
  std::string stop_board();

  /// Digest of the first `blocks` produced chunks of a stream (the rolling
  /// hash right after that many chunks). blocks must be >= 1 and already
  /// produced.
  std::uint64_t digest_after(StreamId stream, std::uint64_t blocks) const;

  std::uint64_t produced_blocks(StreamId stream) const;
  std::uint64_t served_blocks(StreamId stream) const;
  std::uint64_t detections_received() const { return detections_rx_.load(); }
  /// Highest slot (exclusive) the sifting role has fully processed.
  std::uint64_t sift_coverage() const { return sift_coverage_.load(); }
  std::uint64_t sifted_count() const;
  std::vector<SiftedPair> sifted_pairs() const;
  bool production_done() const { return production_done_.load(); }
  /// True once any role hit a non-recoverable error.
  bool failed() const { return failed_.load(); }
  /// What went wrong, when failed() is true.
  std::string failure_reason() const;

  RetentionBuffer& retention(StreamId stream) {
    return stream == StreamId::kPol ? pol_ : decoy_;
  }

  /// Stops all roles and closes the sockets. Idempotent.
  void shutdown();

 private:
  void producer_loop();
  void server_loop();
  void sift_loop();
  CommandFrame handle_request(const CommandFrame& req);
  void maybe_stall();

  SourceConfig cfg_;
  RetentionBuffer pol_;
  RetentionBuffer decoy_;
  SiftSelector selector_;
  std::unique_ptr<RandomBitSource> rng_;

  std::shared_ptr<CommandSession> session_;
  Socket pol_sock_;
  Socket decoy_sock_;

  std::atomic<bool> stop_{false};
  std::atomic<bool> connected_{false};
  std::atomic<bool> production_done_{false};
  std::atomic<bool> failed_{false};
  mutable std::mutex failure_mutex_;
  std::string failure_reason_;
  void fail(const std::string& why);

  mutable std::mutex digest_mutex_;
  std::vector<std::uint64_t> digests_[2];  // rolling hash after chunk i+1

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<NeedBlockPayload> requests_;
  std::deque<DetectionsPayload> reports_;

  mutable std::mutex sift_mutex_;
  std::vector<SiftedPair> sifted_;

  std::atomic<std::uint64_t> served_[2] = {0, 0};
  std::atomic<std::uint64_t> detections_rx_{0};
  std::atomic<std::uint64_t> sift_coverage_{0};
  std::atomic<bool> stall_done_{false};
  std::chrono::steady_clock::time_point run_t0_{};
  std::atomic<bool> run_started_{false};

  std::thread producer_thread_;
  std::thread server_thread_;
  std::thread sift_thread_;
};

}  // namespace qkdtwin
