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
#include <cstdint>
#include <span>
#include <string>

namespace qkdtwin {

/// Thin RAII wrapper over a connected TCP socket. Blocking I/O; a reader
/// stuck in recv is unblocked by shutdown() from another thread.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  static Socket connect_to(const std::string& host, std::uint16_t port,
                           std::chrono::milliseconds timeout =
                               std::chrono::milliseconds(5000));

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  void send_all(std::span<const std::uint8_t> data);
  /// Bytes received (>=1), or 0 on orderly peer shutdown.
  std::size_t recv_some(std::span<std::uint8_t> out);
  /// Fills the whole span; throws Connection if the peer closes first.
  void recv_exact(std::span<std::uint8_t> out);

  void set_nodelay(bool on);
  /// Unblocks any thread sleeping in recv/send on this socket.
  void shutdown_both() noexcept;
  void close() noexcept;

 private:
  int fd_ = -1;
};

/// Listening socket. Port 0 binds an ephemeral port (see port()).
class Listener {
 public:
  explicit Listener(std::uint16_t port, const std::string& bind_addr = "127.0.0.1");
  ~Listener();
  Listener(Listener&&) noexcept;
  Listener& operator=(Listener&&) noexcept;
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  std::uint16_t port() const { return port_; }

  /// Waits for a connection, polling the stop flag; returns an invalid
  /// Socket when stop was raised or the listener was closed.
  Socket accept(const std::atomic<bool>& stop);

  void close() noexcept;

 private:
  // Atomic because close() may race with accept() on another thread.
  std::atomic<int> fd_{-1};
  std::uint16_t port_ = 0;
};

}  // namespace qkdtwin
