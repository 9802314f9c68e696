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

#include "qkdtwin/source_twin.hpp"

#include "json.hpp"
#include "qkdtwin/errors.hpp"
#include "qkdtwin/util.hpp"

namespace qkdtwin {

SourceTwin::SourceTwin(SourceConfig cfg)
    : cfg_(std::move(cfg)),
      pol_(StreamId::kPol, cfg_.retention),
      decoy_(StreamId::kDecoy, cfg_.retention),
      selector_(pol_, decoy_),
      rng_(make_source(cfg_.kind, cfg_.seed, cfg_.qrng_bits_per_second)) {
  cfg_.bias.validate();
  // Production starts immediately; it only depends on the retention
  // permits, not on the board being reachable yet.
  producer_thread_ = std::thread(&SourceTwin::producer_loop, this);
  sift_thread_ = std::thread(&SourceTwin::sift_loop, this);
}

SourceTwin::~SourceTwin() { shutdown(); }

void SourceTwin::shutdown() {
  if (stop_.exchange(true)) {
    // Fall through; joins below tolerate a second pass.
  }
  queue_cv_.notify_all();
  if (session_) session_->close();
  pol_sock_.shutdown_both();
  decoy_sock_.shutdown_both();
  for (std::thread* t : {&producer_thread_, &server_thread_, &sift_thread_}) {
    if (t->joinable()) t->join();
  }
}

void SourceTwin::connect() {
  if (connected_.load()) raise(ErrorCode::kNotReady, "already connected");
  Socket cmd = Socket::connect_to(cfg_.board_addr, cfg_.command_port);
  session_ = std::make_shared<CommandSession>(
      std::move(cmd),
      [this](const CommandFrame& req) { return handle_request(req); });
  if (!cfg_.auth_token.empty()) {
    nlohmann::json j;
    j["auth_token"] = cfg_.auth_token;
    session_->request_ok(Opcode::kSetParam, json_payload(j.dump()));
  }
  // Data channels follow the command handshake. The board answers each
  // connection with its prefill requests.
  pol_sock_ = Socket::connect_to(cfg_.board_addr, cfg_.pol_port);
  decoy_sock_ = Socket::connect_to(cfg_.board_addr, cfg_.decoy_port);
  pol_sock_.set_nodelay(true);
  decoy_sock_.set_nodelay(true);
  connected_.store(true);
  server_thread_ = std::thread(&SourceTwin::server_loop, this);
}

std::string SourceTwin::set_board_params(const std::string& json) {
  CommandFrame reply =
      session_->request_ok(Opcode::kSetParam, json_payload(json));
  return payload_text(reply.payload);
}

std::string SourceTwin::board_status() {
  CommandFrame reply = session_->request_ok(Opcode::kStatus);
  return payload_text(reply.payload);
}

void SourceTwin::start_board() {
  session_->request_ok(Opcode::kStart);
  run_t0_ = std::chrono::steady_clock::now();
  run_started_.store(true);
}

std::string SourceTwin::stop_board() {
  CommandFrame reply = session_->request_ok(
      Opcode::kStop, {}, 0, std::chrono::milliseconds(30'000));
  return payload_text(reply.payload);
}

std::uint64_t SourceTwin::digest_after(StreamId stream,
                                       std::uint64_t blocks) const {
  std::lock_guard lock(digest_mutex_);
  const auto& d = digests_[static_cast<int>(stream)];
  if (blocks == 0 || blocks > d.size()) {
    raise(ErrorCode::kIndexOutOfRange, "no digest for that many blocks");
  }
  return d[blocks - 1];
}

std::uint64_t SourceTwin::produced_blocks(StreamId stream) const {
  std::lock_guard lock(digest_mutex_);
  return digests_[static_cast<int>(stream)].size();
}

std::uint64_t SourceTwin::served_blocks(StreamId stream) const {
  return served_[static_cast<int>(stream)].load();
}

std::uint64_t SourceTwin::sifted_count() const {
  std::lock_guard lock(sift_mutex_);
  return sifted_.size();
}

std::vector<SiftedPair> SourceTwin::sifted_pairs() const {
  std::lock_guard lock(sift_mutex_);
  return sifted_;
}

// Roles -----------------------------------------------------------------

void SourceTwin::producer_loop() {
  const std::size_t n_symbols = cfg_.retention.symbols_per_chunk();
  const auto th_pol = bias_thresholds(cfg_.bias.p_pol, cfg_.bias.resolution_bits);
  const auto th_decoy =
      bias_thresholds(cfg_.bias.p_decoy, cfg_.bias.resolution_bits);
  Fnv1a64 rolling[2];

  try {
    for (std::uint64_t g = 0;
         !stop_.load() && (cfg_.produce_blocks == 0 || g < cfg_.produce_blocks);
         ++g) {
      for (RetentionBuffer* buf : {&pol_, &decoy_}) {
        const int si = static_cast<int>(buf->stream());
        const auto& th = buf->stream() == StreamId::kPol ? th_pol : th_decoy;
        auto span = buf->acquire_write(stop_);
        if (span.empty()) return;  // stopped while waiting for a permit
        bias_pack_symbols(*rng_, th, cfg_.bias.resolution_bits, n_symbols,
                          span, std::chrono::milliseconds(60'000));
        rolling[si].update(span);
        buf->commit_write();
        {
          std::lock_guard lock(digest_mutex_);
          digests_[si].push_back(rolling[si].digest());
        }
      }
    }
    production_done_.store(true);
  } catch (const Error& e) {
    fail(std::string("producer: ") + e.what());
  }
}

void SourceTwin::fail(const std::string& why) {
  {
    std::lock_guard lock(failure_mutex_);
    if (failure_reason_.empty()) failure_reason_ = why;
  }
  failed_.store(true);
}

std::string SourceTwin::failure_reason() const {
  std::lock_guard lock(failure_mutex_);
  return failure_reason_;
}

void SourceTwin::maybe_stall() {
  if (cfg_.stall_at_s < 0 || stall_done_.load() || !run_started_.load()) return;
  auto due = run_t0_ + std::chrono::duration_cast<
                           std::chrono::steady_clock::duration>(
                           std::chrono::duration<double>(cfg_.stall_at_s));
  if (std::chrono::steady_clock::now() < due) return;
  stall_done_.store(true);
  auto until = std::chrono::steady_clock::now() +
               std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                   std::chrono::duration<double>(cfg_.stall_seconds));
  while (!stop_.load() && std::chrono::steady_clock::now() < until) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

void SourceTwin::server_loop() {
  while (!stop_.load()) {
    std::optional<NeedBlockPayload> req;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait_for(lock, std::chrono::milliseconds(50),
                         [&] { return !requests_.empty() || stop_.load(); });
      if (!requests_.empty()) {
        req = requests_.front();
        requests_.pop_front();
      }
    }
    if (!req) continue;
    maybe_stall();
    if (stop_.load()) break;

    if (req->stream_id > 1) continue;  // unknown stream; nothing to serve
    if (cfg_.produce_blocks != 0 && req->seq >= cfg_.produce_blocks) {
      // Past the planned run: the board is prefetching beyond the last
      // block it will ever consume. Nothing to send.
      continue;
    }
    StreamId stream = static_cast<StreamId>(req->stream_id);
    RetentionBuffer& buf = stream == StreamId::kPol ? pol_ : decoy_;
    Socket& sock = stream == StreamId::kPol ? pol_sock_ : decoy_sock_;
    try {
      auto payload = buf.chunk_for_send(req->seq, stop_);
      if (payload.empty()) break;  // stopped
      auto hdr = encode_data_header(req->stream_id, req->seq,
                                    static_cast<std::uint32_t>(payload.size()));
      sock.send_all(hdr);
      sock.send_all(payload);
      buf.mark_sent(req->seq);
      served_[req->stream_id].fetch_add(1, std::memory_order_relaxed);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConnection) return;  // board went away
      if (e.code() == ErrorCode::kChunkAlreadyReleased) continue;  // stale ask
      fail(std::string("block server: ") + e.what());
      return;
    }
  }
}

void SourceTwin::sift_loop() {
  while (!stop_.load()) {
    std::optional<DetectionsPayload> report;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait_for(lock, std::chrono::milliseconds(50),
                         [&] { return !reports_.empty() || stop_.load(); });
      if (!reports_.empty()) {
        report = std::move(reports_.front());
        reports_.pop_front();
      }
    }
    if (!report) continue;
    DetectionReport r;
    r.slot_begin = report->slot_begin;
    r.slot_end = report->slot_end;
    r.indices = std::move(report->indices);
    r.basis = std::move(report->basis);

    // A report can momentarily outrun the server's sent-side bookkeeping
    // (the send completes a hair before mark_sent lands), so retry briefly
    // before declaring the report bad.
    std::vector<SiftedPair> pairs;
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::seconds(5);
    for (;;) {
      try {
        pairs = selector_.select(r);
        sift_coverage_.store(selector_.coverage_watermark(),
                             std::memory_order_relaxed);
        break;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kIndexOutOfRange &&
            std::chrono::steady_clock::now() < deadline && !stop_.load()) {
          std::this_thread::sleep_for(std::chrono::milliseconds(5));
          continue;
        }
        fail(std::string("sifting: ") + e.what());
        break;
      }
    }
    std::lock_guard lock(sift_mutex_);
    sifted_.insert(sifted_.end(), pairs.begin(), pairs.end());
  }
}

CommandFrame SourceTwin::handle_request(const CommandFrame& req) {
  switch (req.opcode) {
    case Opcode::kNeedBlock: {
      NeedBlockPayload p = parse_need_block(req.payload);
      {
        std::lock_guard lock(queue_mutex_);
        requests_.push_back(p);
      }
      queue_cv_.notify_all();
      return make_ack(req.request_id);
    }
    case Opcode::kDetections: {
      DetectionsPayload p =
          parse_detections(req.payload, (req.flags & kFlagHasBasis) != 0);
      detections_rx_.fetch_add(p.indices.size(), std::memory_order_relaxed);
      {
        std::lock_guard lock(queue_mutex_);
        reports_.push_back(std::move(p));
      }
      queue_cv_.notify_all();
      return make_ack(req.request_id);
    }
    case Opcode::kStatus: {
      nlohmann::json j;
      j["produced_pol"] = produced_blocks(StreamId::kPol);
      j["produced_decoy"] = produced_blocks(StreamId::kDecoy);
      j["served_pol"] = served_[0].load();
      j["served_decoy"] = served_[1].load();
      j["sifted"] = sifted_count();
      return make_ack(req.request_id, json_payload(j.dump()));
    }
    default:
      raise(ErrorCode::kProtocol, "unexpected opcode from the board");
  }
}

}  // namespace qkdtwin
