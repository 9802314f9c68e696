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

#include "qkdtwin/command_session.hpp"

#include <array>

#include "json.hpp"

namespace qkdtwin {

CommandFrame make_ack(std::uint32_t request_id, std::vector<std::uint8_t> payload) {
  CommandFrame f;
  f.opcode = Opcode::kAck;
  f.request_id = request_id;
  f.payload = std::move(payload);
  return f;
}

CommandFrame make_error(std::uint32_t request_id, ErrorCode code,
                        const std::string& message) {
  CommandFrame f;
  f.opcode = Opcode::kError;
  f.request_id = request_id;
  const nlohmann::json j{{"code", to_string(code)}, {"message", message}};
  f.payload = json_payload(j.dump());
  return f;
}

CommandSession::CommandSession(Socket socket, Handler handler)
    : sock_(std::move(socket)), handler_(std::move(handler)) {
  sock_.set_nodelay(true);
  reader_ = std::thread([this] { reader_loop(); });
}

CommandSession::~CommandSession() { close(); }

void CommandSession::close() {
  // Serializes concurrent closers; only the first join()s the reader.
  std::lock_guard lock(close_mutex_);
  closing_.store(true);
  sock_.shutdown_both();
  if (reader_.joinable()) reader_.join();
}

void CommandSession::send_frame(const CommandFrame& frame) {
  const auto bytes = encode_command(frame);
  std::lock_guard lock(write_mutex_);
  sock_.send_all(bytes);
}

CommandFrame CommandSession::request(Opcode op, std::vector<std::uint8_t> payload,
                                     std::uint8_t flags,
                                     std::chrono::milliseconds timeout) {
  if (dead_.load()) {
    raise(ErrorCode::kConnection, "command session is closed");
  }
  CommandFrame frame;
  frame.opcode = op;
  frame.flags = flags;
  frame.request_id = next_id_.fetch_add(1);
  frame.payload = std::move(payload);
  {
    std::lock_guard lock(pending_mutex_);
    pending_.emplace(frame.request_id, std::nullopt);
  }
  send_frame(frame);
  std::unique_lock lock(pending_mutex_);
  const bool got = pending_cv_.wait_for(lock, timeout, [&] {
    const auto it = pending_.find(frame.request_id);
    return it == pending_.end() || it->second.has_value() || dead_.load();
  });
  const auto it = pending_.find(frame.request_id);
  if (it != pending_.end() && it->second.has_value()) {
    CommandFrame reply = std::move(*it->second);
    pending_.erase(it);
    return reply;
  }
  if (it != pending_.end()) pending_.erase(it);
  if (dead_.load()) {
    raise(ErrorCode::kConnection, "session closed while awaiting reply");
  }
  if (!got) {
    raise(ErrorCode::kTimeout,
          std::string("no reply to ") + to_string(op) + " within " +
              std::to_string(timeout.count()) + " ms");
  }
  raise(ErrorCode::kProtocol, "reply bookkeeping lost");  // unreachable
}

CommandFrame CommandSession::request_ok(Opcode op,
                                        std::vector<std::uint8_t> payload,
                                        std::uint8_t flags,
                                        std::chrono::milliseconds timeout) {
  CommandFrame reply = request(op, std::move(payload), flags, timeout);
  if (reply.opcode == Opcode::kError) {
    raise(ErrorCode::kProtocol, std::string("peer rejected ") + to_string(op) +
                                    ": " + payload_text(reply.payload));
  }
  return reply;
}

void CommandSession::fail_pending() {
  {
    std::lock_guard lock(pending_mutex_);
    dead_.store(true);
  }
  pending_cv_.notify_all();
}

void CommandSession::reader_loop() {
  CommandDecoder decoder;
  std::array<std::uint8_t, 4096> buf;
  try {
    for (;;) {
      const std::size_t n = sock_.recv_some(buf);
      if (n == 0) break;
      decoder.feed(std::span(buf).first(n));
      while (auto frame = decoder.next()) {
        if (frame->opcode == Opcode::kAck || frame->opcode == Opcode::kError) {
          std::lock_guard lock(pending_mutex_);
          const auto it = pending_.find(frame->request_id);
          if (it != pending_.end()) {
            it->second = std::move(*frame);
            pending_cv_.notify_all();
          }
          // Replies to forgotten requests (timed out) are dropped.
          continue;
        }
        CommandFrame reply;
        try {
          if (handler_) {
            reply = handler_(*frame);
            reply.request_id = frame->request_id;
            if (reply.opcode != Opcode::kAck && reply.opcode != Opcode::kError) {
              reply = make_error(frame->request_id, ErrorCode::kProtocol,
                                 "handler produced a non-reply opcode");
            }
          } else {
            reply = make_error(frame->request_id, ErrorCode::kProtocol,
                               "no handler for requests on this session");
          }
        } catch (const Error& e) {
          reply = make_error(frame->request_id, e.code(), e.what());
        } catch (const std::exception& e) {
          reply = make_error(frame->request_id, ErrorCode::kProtocol, e.what());
        }
        send_frame(reply);
      }
    }
  } catch (const Error&) {
    // Connection torn down; fall through to wake any waiters.
  }
  fail_pending();
}

}  // namespace qkdtwin
