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
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "qkdtwin/errors.hpp"
#include "qkdtwin/tcp.hpp"
#include "qkdtwin/wire.hpp"

namespace qkdtwin {

CommandFrame make_ack(std::uint32_t request_id,
                      std::vector<std::uint8_t> payload = {});
CommandFrame make_error(std::uint32_t request_id, ErrorCode code,
                        const std::string& message);

/// Full-duplex command channel. Either peer may issue requests at any
/// time; every non-reply frame is answered with exactly one ACK or ERROR
/// carrying the request's id. Incoming requests run through the handler
/// on the session's reader thread; throwing an Error from the handler
/// turns into an ERROR reply automatically.
class CommandSession {
 public:
  using Handler = std::function<CommandFrame(const CommandFrame& request)>;

  CommandSession(Socket socket, Handler handler);
  ~CommandSession();
  CommandSession(const CommandSession&) = delete;
  CommandSession& operator=(const CommandSession&) = delete;

  /// Sends a request and waits for its reply. Throws Timeout, or
  /// Connection if the session dies first.
  CommandFrame request(Opcode op, std::vector<std::uint8_t> payload = {},
                       std::uint8_t flags = 0,
                       std::chrono::milliseconds timeout =
                           std::chrono::milliseconds(5000));

  /// Like request but raises Protocol when the peer answered with ERROR.
  CommandFrame request_ok(Opcode op, std::vector<std::uint8_t> payload = {},
                          std::uint8_t flags = 0,
                          std::chrono::milliseconds timeout =
                              std::chrono::milliseconds(5000));

  bool alive() const { return !dead_.load(std::memory_order_relaxed); }
  void close();

 private:
  void reader_loop();
  void fail_pending();
  void send_frame(const CommandFrame& frame);

  Socket sock_;
  Handler handler_;
  std::mutex close_mutex_;
  std::mutex write_mutex_;
  std::mutex pending_mutex_;
  std::condition_variable pending_cv_;
  std::map<std::uint32_t, std::optional<CommandFrame>> pending_;
  std::atomic<std::uint32_t> next_id_{1};
  std::atomic<bool> dead_{false};
  std::atomic<bool> closing_{false};
  std::thread reader_;
};

}  // namespace qkdtwin
