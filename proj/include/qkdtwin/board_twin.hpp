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
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "qkdtwin/block_memory.hpp"
#include "qkdtwin/command_session.hpp"
#include "qkdtwin/encoding.hpp"
#include "qkdtwin/interrupts.hpp"
#include "qkdtwin/qsc.hpp"
#include "qkdtwin/stream_engine.hpp"
#include "qkdtwin/tcp.hpp"

namespace qkdtwin {

struct BoardConfig {
  std::string bind_addr = "127.0.0.1";
  // Port 0 binds ephemerally; read the actual value back after construction.
  std::uint16_t command_port = 7000;
  std::uint16_t pol_port = 7001;
  std::uint16_t decoy_port = 7002;
  std::uint16_t detections_port = 7003;

  ClockConfig clock{200'000'000, 4};
  ChannelOffsets offsets;
  RingBufferConfig ring;
  std::size_t bram_words = 32'768;  // per-stream block memory, 32-bit words

  /// Pace the emitted slots against the wall clock instead of free-running.
  bool real_time = false;
  /// Stop after this many slots; 0 runs until STOP arrives.
  std::uint64_t max_slots = 0;
  /// When non-empty, sessions must present this token via SET_PARAM before
  /// any other request is accepted.
  std::string auth_token;
};

enum class BoardState : std::uint8_t { kIdle, kRunning, kDone, kFailed };

const char* to_string(BoardState s) noexcept;

/// Point-in-time copy of the board counters, safe to read while running.
/// Values lag the emulator by at most one advance batch.
struct BoardStatus {
  BoardState state = BoardState::kIdle;
  double elapsed_s = 0.0;
  std::uint64_t slots = 0;
  std::uint64_t vacuum_slots = 0;
  std::uint64_t rx_bytes[2] = {0, 0};
  std::uint64_t rx_blocks[2] = {0, 0};
  std::uint64_t rx_hash[2] = {0, 0};
  std::uint64_t feeds[2] = {0, 0};
  std::uint64_t blocks_consumed[2] = {0, 0};
  std::uint64_t consumed_words[2] = {0, 0};
  std::uint64_t consumed_hash[2] = {0, 0};
  std::size_t occupancy[2] = {0, 0};
  std::uint64_t underruns = 0;
  std::uint64_t sequence_gaps = 0;
  std::uint64_t detections_relayed = 0;
  std::string error;
};

/// The transmitter board: four listening sockets (command, two data
/// streams, detections), the staging rings, the doubled block memories and
/// the clocked pulse generator, each role on its own thread.
///
/// Lifecycle: construct (binds and listens), peer connects command then
/// data, board requests the first ring's worth of blocks per stream, peer
/// streams them, START begins emission once both rings are full. Emission
/// ends at max_slots or STOP. Detection reports arriving on the fourth
/// socket are relayed to the command peer.
class BoardTwin {
 public:
  /// sink receives every emitted pulse frame on the emulator thread; pass
  /// nullptr to skip frame construction (throughput runs).
  explicit BoardTwin(BoardConfig cfg, FrameSink* sink = nullptr);
  ~BoardTwin();
  BoardTwin(const BoardTwin&) = delete;
  BoardTwin& operator=(const BoardTwin&) = delete;

  std::uint16_t command_port() const { return cmd_listener_.port(); }
  std::uint16_t pol_port() const { return pol_listener_.port(); }
  std::uint16_t decoy_port() const { return decoy_listener_.port(); }
  std::uint16_t detections_port() const { return det_listener_.port(); }

  BoardStatus status() const;

  /// Waits until the run left the running state (or never started and
  /// shutdown was requested). False on timeout.
  bool wait_done(std::chrono::milliseconds timeout) const;

  /// Stops all threads and closes all sockets. Idempotent.
  void shutdown();

 private:
  struct SessionCtx {
    std::shared_ptr<CommandSession> session;
    std::atomic<bool> authed{false};
  };

  void command_accept_loop();
  void detections_accept_loop();
  void data_loop(StreamId stream);
  void feed_loop(StreamId stream);
  void emulator_loop();

  CommandFrame handle_command(SessionCtx& ctx, const CommandFrame& req);
  CommandFrame handle_set_param(SessionCtx& ctx, const CommandFrame& req);
  CommandFrame handle_start(const CommandFrame& req);
  CommandFrame handle_stop(const CommandFrame& req);
  CommandFrame handle_status(const CommandFrame& req);
  CommandFrame handle_detections(const CommandFrame& req);

  std::string status_json() const;
  void fail_run(const std::string& what);
  void finish_run(BoardState final_state);
  std::shared_ptr<CommandSession> peer() const;
  void send_need_block(StreamId stream, std::uint64_t seq);

  BoardConfig cfg_;
  FrameSink* sink_;

  BlockMemory pol_mem_;
  BlockMemory decoy_mem_;
  StreamPair engines_;
  InterruptQueue irq_pol_;
  InterruptQueue irq_decoy_;

  Listener cmd_listener_;
  Listener pol_listener_;
  Listener decoy_listener_;
  Listener det_listener_;

  mutable std::mutex peer_mutex_;
  std::shared_ptr<SessionCtx> peer_ctx_;  // the command connection
  std::shared_ptr<SessionCtx> det_ctx_;   // the detections connection

  std::atomic<bool> stop_{false};       // process shutdown
  std::atomic<bool> stop_run_{false};   // ends the current emission
  std::atomic<bool> started_{false};
  std::atomic<bool> run_real_time_{false};
  mutable std::mutex run_mutex_;
  mutable std::condition_variable run_cv_;
  BoardState state_ = BoardState::kIdle;
  std::string error_;
  std::atomic<double> elapsed_s_{0.0};

  // Mirrors of single-threaded emulator state, refreshed once per batch.
  std::atomic<std::uint64_t> slots_{0};
  std::atomic<std::uint64_t> vacuum_slots_{0};
  std::atomic<std::uint64_t> consumed_words_[2] = {0, 0};
  std::atomic<std::uint64_t> consumed_hash_[2] = {0, 0};

  std::atomic<std::uint64_t> rx_bytes_[2] = {0, 0};
  std::atomic<std::uint64_t> rx_blocks_[2] = {0, 0};
  Fnv1a64 rx_hash_[2];
  std::atomic<std::uint64_t> rx_hash_digest_[2] = {0, 0};
  std::atomic<std::uint64_t> feeds_[2] = {0, 0};
  std::atomic<std::uint64_t> blocks_consumed_[2] = {0, 0};
  std::atomic<std::uint64_t> underruns_{0};
  std::atomic<std::uint64_t> sequence_gaps_{0};
  std::atomic<std::uint64_t> detections_relayed_{0};

  std::thread cmd_thread_;
  std::thread det_thread_;
  std::thread data_pol_thread_;
  std::thread data_decoy_thread_;
  std::thread feed_pol_thread_;
  std::thread feed_decoy_thread_;
  std::thread emu_thread_;
};

}  // namespace qkdtwin
