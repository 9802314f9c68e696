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

#include "qkdtwin/board_twin.hpp"

#include <array>
#include <cinttypes>
#include <cstdio>

#include "json.hpp"
#include "qkdtwin/errors.hpp"

namespace qkdtwin {

namespace {

constexpr auto kPollInterval = std::chrono::milliseconds(10);

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

}  // namespace

const char* to_string(BoardState s) noexcept {
  switch (s) {
    case BoardState::kIdle:
      return "idle";
    case BoardState::kRunning:
      return "running";
    case BoardState::kDone:
      return "done";
    case BoardState::kFailed:
      return "failed";
  }
  return "?";
}

BoardTwin::BoardTwin(BoardConfig cfg, FrameSink* sink)
    : cfg_(std::move(cfg)),
      sink_(sink),
      pol_mem_(StreamId::kPol, MemoryDirection::kTopDown, cfg_.bram_words),
      decoy_mem_(StreamId::kDecoy, MemoryDirection::kTopDown, cfg_.bram_words),
      engines_(cfg_.ring, pol_mem_, decoy_mem_),
      cmd_listener_(cfg_.command_port, cfg_.bind_addr),
      pol_listener_(cfg_.pol_port, cfg_.bind_addr),
      decoy_listener_(cfg_.decoy_port, cfg_.bind_addr),
      det_listener_(cfg_.detections_port, cfg_.bind_addr) {
  cfg_.clock.validate();
  cfg_.offsets.validate(cfg_.clock);
  cfg_.ring.validate();

  cmd_thread_ = std::thread(&BoardTwin::command_accept_loop, this);
  det_thread_ = std::thread(&BoardTwin::detections_accept_loop, this);
  data_pol_thread_ = std::thread(&BoardTwin::data_loop, this, StreamId::kPol);
  data_decoy_thread_ =
      std::thread(&BoardTwin::data_loop, this, StreamId::kDecoy);
  feed_pol_thread_ = std::thread(&BoardTwin::feed_loop, this, StreamId::kPol);
  feed_decoy_thread_ =
      std::thread(&BoardTwin::feed_loop, this, StreamId::kDecoy);
  emu_thread_ = std::thread(&BoardTwin::emulator_loop, this);
}

BoardTwin::~BoardTwin() { shutdown(); }

void BoardTwin::shutdown() {
  if (stop_.exchange(true)) {
    // A previous call already ran the teardown below; the joinable checks
    // make a second pass harmless.
  }
  stop_run_.store(true);
  irq_pol_.close();
  irq_decoy_.close();
  run_cv_.notify_all();

  cmd_listener_.close();
  pol_listener_.close();
  decoy_listener_.close();
  det_listener_.close();

  std::shared_ptr<SessionCtx> peer, det;
  {
    std::lock_guard lock(peer_mutex_);
    peer = peer_ctx_;
    det = det_ctx_;
  }
  if (peer && peer->session) peer->session->close();
  if (det && det->session) det->session->close();

  for (std::thread* t :
       {&cmd_thread_, &det_thread_, &data_pol_thread_, &data_decoy_thread_,
        &feed_pol_thread_, &feed_decoy_thread_, &emu_thread_}) {
    if (t->joinable()) t->join();
  }
}

std::shared_ptr<CommandSession> BoardTwin::peer() const {
  std::lock_guard lock(peer_mutex_);
  return peer_ctx_ ? peer_ctx_->session : nullptr;
}

// Session plumbing -----------------------------------------------------------

void BoardTwin::command_accept_loop() {
  while (!stop_.load()) {
    Socket sock = cmd_listener_.accept(stop_);
    if (!sock.valid()) {
      if (stop_.load()) break;
      continue;
    }
    auto ctx = std::make_shared<SessionCtx>();
    if (cfg_.auth_token.empty()) ctx->authed.store(true);
    std::weak_ptr<SessionCtx> weak = ctx;
    ctx->session = std::make_shared<CommandSession>(
        std::move(sock), [this, weak](const CommandFrame& req) {
          auto c = weak.lock();
          if (!c) raise(ErrorCode::kConnection, "session is closing");
          return handle_command(*c, req);
        });
    {
      std::lock_guard lock(peer_mutex_);
      peer_ctx_ = ctx;
    }
    while (!stop_.load() && ctx->session->alive()) {
      std::this_thread::sleep_for(kPollInterval);
    }
    {
      std::lock_guard lock(peer_mutex_);
      if (peer_ctx_ == ctx) peer_ctx_.reset();
    }
    ctx->session->close();
  }
}

void BoardTwin::detections_accept_loop() {
  while (!stop_.load()) {
    Socket sock = det_listener_.accept(stop_);
    if (!sock.valid()) {
      if (stop_.load()) break;
      continue;
    }
    auto ctx = std::make_shared<SessionCtx>();
    if (cfg_.auth_token.empty()) ctx->authed.store(true);
    std::weak_ptr<SessionCtx> weak = ctx;
    ctx->session = std::make_shared<CommandSession>(
        std::move(sock), [this, weak](const CommandFrame& req) {
          auto c = weak.lock();
          if (!c) raise(ErrorCode::kConnection, "session is closing");
          return handle_command(*c, req);
        });
    {
      std::lock_guard lock(peer_mutex_);
      det_ctx_ = ctx;
    }
    while (!stop_.load() && ctx->session->alive()) {
      std::this_thread::sleep_for(kPollInterval);
    }
    {
      std::lock_guard lock(peer_mutex_);
      if (det_ctx_ == ctx) det_ctx_.reset();
    }
    ctx->session->close();
  }
}

// Command handling -----------------------------------------------------------

CommandFrame BoardTwin::handle_command(SessionCtx& ctx,
                                       const CommandFrame& req) {
  if (!ctx.authed.load() && req.opcode != Opcode::kSetParam) {
    raise(ErrorCode::kProtocol, "authentication required");
  }
  switch (req.opcode) {
    case Opcode::kSetParam:
      return handle_set_param(ctx, req);
    case Opcode::kStart:
      return handle_start(req);
    case Opcode::kStop:
      return handle_stop(req);
    case Opcode::kStatus:
      return handle_status(req);
    case Opcode::kDetections:
      return handle_detections(req);
    case Opcode::kNeedBlock:
      raise(ErrorCode::kProtocol, "NEED_BLOCK flows from board to source");
    default:
      raise(ErrorCode::kProtocol, "unexpected opcode");
  }
}

CommandFrame BoardTwin::handle_set_param(SessionCtx& ctx,
                                         const CommandFrame& req) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(payload_text(req.payload));
    if (!j.is_object()) raise(ErrorCode::kProtocol, "parameters must be an object");
  } catch (const nlohmann::json::exception&) {
    raise(ErrorCode::kProtocol, "SET_PARAM payload is not valid JSON");
  }

  if (auto it = j.find("auth_token"); it != j.end()) {
    if (cfg_.auth_token.empty() || it->get<std::string>() == cfg_.auth_token) {
      ctx.authed.store(true);
    } else {
      raise(ErrorCode::kProtocol, "auth token rejected");
    }
    j.erase("auth_token");
  }
  if (!ctx.authed.load()) {
    raise(ErrorCode::kProtocol, "authentication required");
  }

  if (!j.empty()) {
    std::lock_guard lock(run_mutex_);
    if (state_ != BoardState::kIdle) {
      raise(ErrorCode::kNotReady, "parameters are frozen once started");
    }
    BoardConfig next = cfg_;
    for (auto& [key, value] : j.items()) {
      try {
        if (key == "clock_hz") {
          next.clock.clock_hz = value.get<std::uint64_t>();
        } else if (key == "slot_ticks") {
          next.clock.slot_ticks = value.get<std::uint32_t>();
        } else if (key == "laser_offset") {
          next.offsets.laser = value.get<std::uint32_t>();
        } else if (key == "pol_offset") {
          next.offsets.pol = value.get<std::uint32_t>();
        } else if (key == "intensity_offset") {
          next.offsets.intensity = value.get<std::uint32_t>();
        } else if (key == "real_time") {
          next.real_time = value.get<bool>();
        } else if (key == "max_slots") {
          next.max_slots = value.get<std::uint64_t>();
        } else {
          raise(ErrorCode::kInvalidConfig, "unknown parameter: " + key);
        }
      } catch (const nlohmann::json::exception&) {
        raise(ErrorCode::kInvalidConfig, "bad value for parameter: " + key);
      }
    }
    next.clock.validate();
    next.offsets.validate(next.clock);
    cfg_ = std::move(next);
  }
  return make_ack(req.request_id, json_payload(status_json()));
}

CommandFrame BoardTwin::handle_start(const CommandFrame& req) {
  {
    std::lock_guard lock(run_mutex_);
    if (state_ != BoardState::kIdle) {
      raise(ErrorCode::kNotReady, "board is not idle");
    }
    if (!engines_.pol.preloaded() || !engines_.decoy.preloaded()) {
      raise(ErrorCode::kNotReady, "staging buffers are not preloaded");
    }
    state_ = BoardState::kRunning;
    run_real_time_.store(cfg_.real_time);
    started_.store(true);
  }
  run_cv_.notify_all();
  return make_ack(req.request_id, json_payload(status_json()));
}

CommandFrame BoardTwin::handle_stop(const CommandFrame& req) {
  bool was_running;
  {
    std::lock_guard lock(run_mutex_);
    was_running = state_ == BoardState::kRunning;
  }
  stop_run_.store(true);
  if (was_running) wait_done(std::chrono::milliseconds(10'000));
  return make_ack(req.request_id, json_payload(status_json()));
}

CommandFrame BoardTwin::handle_status(const CommandFrame& req) {
  return make_ack(req.request_id, json_payload(status_json()));
}

CommandFrame BoardTwin::handle_detections(const CommandFrame& req) {
  auto pc = peer();
  if (!pc) raise(ErrorCode::kNotReady, "no command peer to relay to");
  CommandFrame reply = pc->request(Opcode::kDetections, req.payload, req.flags);
  if (reply.opcode != Opcode::kAck) {
    raise(ErrorCode::kProtocol,
          "detections relay rejected: " + payload_text(reply.payload));
  }
  detections_relayed_.fetch_add(1, std::memory_order_relaxed);
  return make_ack(req.request_id, reply.payload);
}

BoardStatus BoardTwin::status() const {
  BoardStatus s;
  {
    std::lock_guard lock(run_mutex_);
    s.state = state_;
    s.error = error_;
  }
  s.elapsed_s = elapsed_s_.load();
  s.slots = slots_.load();
  s.vacuum_slots = vacuum_slots_.load();
  for (int i = 0; i < 2; ++i) {
    s.rx_bytes[i] = rx_bytes_[i].load();
    s.rx_blocks[i] = rx_blocks_[i].load();
    s.rx_hash[i] = rx_hash_digest_[i].load();
    s.feeds[i] = feeds_[i].load();
    s.blocks_consumed[i] = blocks_consumed_[i].load();
    s.consumed_words[i] = consumed_words_[i].load();
    s.consumed_hash[i] = consumed_hash_[i].load();
  }
  s.occupancy[0] = engines_.pol.ring().occupancy();
  s.occupancy[1] = engines_.decoy.ring().occupancy();
  s.underruns = underruns_.load();
  s.sequence_gaps = sequence_gaps_.load();
  s.detections_relayed = detections_relayed_.load();
  return s;
}

std::string BoardTwin::status_json() const {
  BoardStatus s = status();
  nlohmann::json j;
  j["state"] = to_string(s.state);
  if (!s.error.empty()) j["error"] = s.error;
  j["elapsed_s"] = s.elapsed_s;
  j["slots"] = s.slots;
  j["vacuum_slots"] = s.vacuum_slots;
  j["rx_bytes_pol"] = s.rx_bytes[0];
  j["rx_bytes_decoy"] = s.rx_bytes[1];
  j["rx_blocks_pol"] = s.rx_blocks[0];
  j["rx_blocks_decoy"] = s.rx_blocks[1];
  j["rx_hash_pol"] = hex64(s.rx_hash[0]);
  j["rx_hash_decoy"] = hex64(s.rx_hash[1]);
  j["feeds_pol"] = s.feeds[0];
  j["feeds_decoy"] = s.feeds[1];
  j["blocks_consumed_pol"] = s.blocks_consumed[0];
  j["blocks_consumed_decoy"] = s.blocks_consumed[1];
  j["consumed_words_pol"] = s.consumed_words[0];
  j["consumed_words_decoy"] = s.consumed_words[1];
  j["consumed_hash_pol"] = hex64(s.consumed_hash[0]);
  j["consumed_hash_decoy"] = hex64(s.consumed_hash[1]);
  j["occupancy_pol"] = s.occupancy[0];
  j["occupancy_decoy"] = s.occupancy[1];
  j["underruns"] = s.underruns;
  j["sequence_gaps"] = s.sequence_gaps;
  j["detections_relayed"] = s.detections_relayed;
  {
    std::lock_guard lock(run_mutex_);
    j["clock_hz"] = cfg_.clock.clock_hz;
    j["slot_ticks"] = cfg_.clock.slot_ticks;
    j["repetition_hz"] = cfg_.clock.repetition_hz();
    j["real_time"] = cfg_.real_time;
    j["max_slots"] = cfg_.max_slots;
    j["ring_blocks"] = cfg_.ring.n_blocks;
    j["ring_block_bytes"] = cfg_.ring.block_bytes;
  }
  return j.dump();
}

// Run state ------------------------------------------------------------------

bool BoardTwin::wait_done(std::chrono::milliseconds timeout) const {
  std::unique_lock lock(run_mutex_);
  return run_cv_.wait_for(lock, timeout, [&] {
    return state_ == BoardState::kDone || state_ == BoardState::kFailed;
  });
}

void BoardTwin::fail_run(const std::string& what) {
  {
    std::lock_guard lock(run_mutex_);
    if (state_ != BoardState::kFailed) {
      state_ = BoardState::kFailed;
      error_ = what;
    }
  }
  stop_run_.store(true);
  run_cv_.notify_all();
}

void BoardTwin::finish_run(BoardState final_state) {
  {
    std::lock_guard lock(run_mutex_);
    if (state_ == BoardState::kFailed) {
      run_cv_.notify_all();
      return;
    }
    state_ = final_state;
  }
  run_cv_.notify_all();
}

// Data plane -----------------------------------------------------------------

void BoardTwin::send_need_block(StreamId stream, std::uint64_t seq) {
  auto pc = peer();
  if (!pc) raise(ErrorCode::kConnection, "no command peer");
  NeedBlockPayload p{static_cast<std::uint8_t>(stream),
                     static_cast<std::uint32_t>(seq)};
  // ACK means queued; an ERROR (e.g. past the end of the planned run) is
  // the source's call to make, not a board fault.
  pc->request(Opcode::kNeedBlock, encode_need_block(p));
}

void BoardTwin::data_loop(StreamId stream) {
  StreamEngine& eng =
      stream == StreamId::kPol ? engines_.pol : engines_.decoy;
  Listener& listener =
      stream == StreamId::kPol ? pol_listener_ : decoy_listener_;
  const int si = static_cast<int>(stream);

  while (!stop_.load()) {
    Socket sock = listener.accept(stop_);
    if (!sock.valid()) {
      if (stop_.load()) break;
      continue;
    }
    // Data channels follow the command handshake.
    std::shared_ptr<CommandSession> pc;
    while (!stop_.load() && !(pc = peer())) {
      std::this_thread::sleep_for(kPollInterval);
    }
    if (!pc) break;

    // Prefill: ask for the first ring's worth of blocks.
    try {
      for (std::uint64_t seq : eng.startup_requests()) {
        send_need_block(stream, seq);
      }
    } catch (const Error&) {
      continue;  // command peer went away; wait for a fresh connection
    }

    std::uint64_t expected = eng.ring().ingested_blocks();
    std::array<std::uint8_t, kDataHeaderBytes> hdr{};
    try {
      while (!stop_.load()) {
        sock.recv_exact(hdr);
        DataHeader h = parse_data_header(hdr);
        if (h.stream_id != static_cast<std::uint8_t>(stream)) {
          raise(ErrorCode::kProtocol, "stream id mismatch on data socket");
        }
        if (h.length != cfg_.ring.block_bytes) {
          raise(ErrorCode::kLengthError,
                "data frames must carry exactly one block");
        }
        if (h.seq != expected) {
          sequence_gaps_.fetch_add(1, std::memory_order_relaxed);
          fail_run(std::string("sequence gap on ") + to_string(stream) +
                   " data channel: expected block " +
                   std::to_string(expected) + ", got " +
                   std::to_string(h.seq));
          break;  // abort the connection
        }
        if (!eng.ring().wait_space(stop_)) break;
        auto dst = eng.ring().begin_fill(h.seq);
        sock.recv_exact(dst);
        // Count and hash before complete_fill publishes the block, so any
        // status snapshot that sees the block also sees its bookkeeping.
        rx_hash_[si].update(dst);
        rx_hash_digest_[si].store(rx_hash_[si].digest(),
                                  std::memory_order_relaxed);
        rx_bytes_[si].fetch_add(h.length, std::memory_order_relaxed);
        rx_blocks_[si].fetch_add(1, std::memory_order_relaxed);
        eng.ring().complete_fill(h.seq);
        ++expected;
      }
    } catch (const Error& e) {
      // Orderly peer close ends the stream; anything else poisons the run.
      if (!stop_.load() && e.code() != ErrorCode::kConnection) {
        fail_run(std::string(to_string(stream)) + " data channel: " +
                 e.what());
      }
    }
  }
}

void BoardTwin::feed_loop(StreamId stream) {
  StreamEngine& eng =
      stream == StreamId::kPol ? engines_.pol : engines_.decoy;
  InterruptQueue& irqs = stream == StreamId::kPol ? irq_pol_ : irq_decoy_;
  const int si = static_cast<int>(stream);

  while (!stop_.load()) {
    auto ev = irqs.pop(std::chrono::milliseconds(50));
    if (!ev) {
      if (irqs.closed()) break;
      continue;
    }
    try {
      if (!run_real_time_.load()) {
        // Free-running mode blocks on the ring instead of underrunning.
        if (!eng.ring().wait_chunk(stop_)) break;
      }
      auto consumed = eng.feed_chunk(*ev);
      feeds_[si].fetch_add(1, std::memory_order_relaxed);
      if (consumed) {
        blocks_consumed_[si].fetch_add(1, std::memory_order_relaxed);
        if (auto next = eng.request_refill(*consumed)) {
          send_need_block(stream, *next);
        }
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kUnderrun) {
        underruns_.fetch_add(1, std::memory_order_relaxed);
        fail_run(std::string("underrun on ") + to_string(stream) + " feed");
      } else if (e.code() == ErrorCode::kConnection ||
                 e.code() == ErrorCode::kTimeout) {
        // Refill request raced the peer going away; the drained ring will
        // surface the real failure if the run keeps going.
      } else {
        fail_run(std::string(to_string(stream)) + " feed: " + e.what());
      }
    }
  }
}

// Emulator -------------------------------------------------------------------

void BoardTwin::emulator_loop() {
  {
    std::unique_lock lock(run_mutex_);
    run_cv_.wait(lock, [&] { return started_.load() || stop_.load(); });
  }
  if (!started_.load()) return;

  ClockConfig clock;
  ChannelOffsets offsets;
  bool real_time;
  std::uint64_t max_slots;
  {
    std::lock_guard lock(run_mutex_);
    clock = cfg_.clock;
    offsets = cfg_.offsets;
    real_time = cfg_.real_time;
    max_slots = cfg_.max_slots;
  }

  try {
    for (StreamId s : {StreamId::kPol, StreamId::kDecoy}) {
      StreamEngine& eng = s == StreamId::kPol ? engines_.pol : engines_.decoy;
      // With very short blocks the initial half loads can already drain
      // one; its refill must be requested like any other.
      for (std::uint64_t seq : eng.feed_initial()) {
        blocks_consumed_[static_cast<int>(s)].fetch_add(
            1, std::memory_order_relaxed);
        if (auto next = eng.request_refill(seq)) send_need_block(s, *next);
      }
    }

    QStatesController qsc(clock, offsets);
    qsc.start();

    const double rep_hz = clock.repetition_hz();
    // Batch size trades counter freshness against per-call overhead: about
    // 10 ms of slots when paced, a few ms of work when free-running.
    const std::uint64_t batch =
        real_time ? std::max<std::uint64_t>(1, static_cast<std::uint64_t>(
                                                   rep_hz / 100.0))
                  : (std::uint64_t{1} << 22);

    const auto t0 = std::chrono::steady_clock::now();
    std::uint64_t done = 0;
    while (!stop_run_.load(std::memory_order_relaxed)) {
      if (max_slots != 0 && done >= max_slots) break;
      std::uint64_t want = batch;
      if (max_slots != 0) want = std::min(want, max_slots - done);
      if (real_time) {
        auto target =
            t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                     std::chrono::duration<double>(static_cast<double>(done) /
                                                   rep_hz));
        std::this_thread::sleep_until(target);
      }
      std::uint64_t n = qsc.advance(pol_mem_, decoy_mem_, want, sink_,
                                    &irq_pol_, &irq_decoy_, stop_run_);
      done += n;

      const EmuCounters& c = qsc.counters();
      slots_.store(c.slots, std::memory_order_relaxed);
      vacuum_slots_.store(c.vacuum_slots, std::memory_order_relaxed);
      consumed_words_[0].store(c.words_pol, std::memory_order_relaxed);
      consumed_words_[1].store(c.words_decoy, std::memory_order_relaxed);
      consumed_hash_[0].store(qsc.consumed_hash(StreamId::kPol),
                              std::memory_order_relaxed);
      consumed_hash_[1].store(qsc.consumed_hash(StreamId::kDecoy),
                              std::memory_order_relaxed);
      elapsed_s_.store(std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - t0)
                           .count());
      if (n < want) break;  // stop flag raised mid-batch
    }
    elapsed_s_.store(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count());
    qsc.stop();
    finish_run(BoardState::kDone);
  } catch (const Error& e) {
    fail_run(std::string("emulator: ") + e.what());
  } catch (const std::exception& e) {
    fail_run(std::string("emulator: ") + e.what());
  }
}

}  // namespace qkdtwin
