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

#include "qkdtwin/tcp.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "qkdtwin/errors.hpp"

namespace qkdtwin {

namespace {

[[noreturn]] void raise_errno(ErrorCode code, const std::string& what) {
  raise(code, what + ": " + std::strerror(errno));
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    raise(ErrorCode::kInvalidConfig, "bad IPv4 address: " + host);
  }
  return addr;
}

}  // namespace

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

Socket Socket::connect_to(const std::string& host, std::uint16_t port,
                          std::chrono::milliseconds timeout) {
  const sockaddr_in addr = make_addr(host, port);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) raise_errno(ErrorCode::kIo, "socket");
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) {
      return Socket(fd);
    }
    ::close(fd);
    // The server side may simply not be listening yet; retry until the
    // deadline so startup ordering between twins does not matter.
    if (std::chrono::steady_clock::now() >= deadline) {
      raise_errno(ErrorCode::kConnection,
                  "connect to " + host + ":" + std::to_string(port));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

void Socket::send_all(std::span<const std::uint8_t> data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent,
                             MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      raise_errno(ErrorCode::kConnection, "send");
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::size_t Socket::recv_some(std::span<std::uint8_t> out) {
  for (;;) {
    const ssize_t n = ::recv(fd_, out.data(), out.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    raise_errno(ErrorCode::kConnection, "recv");
  }
}

void Socket::recv_exact(std::span<std::uint8_t> out) {
  std::size_t have = 0;
  while (have < out.size()) {
    const std::size_t n = recv_some(out.subspan(have));
    if (n == 0) {
      raise(ErrorCode::kConnection,
            "peer closed mid-message (" + std::to_string(have) + "/" +
                std::to_string(out.size()) + " bytes)");
    }
    have += n;
  }
}

void Socket::set_nodelay(bool on) {
  const int flag = on ? 1 : 0;
  if (::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &flag, sizeof(flag)) != 0) {
    raise_errno(ErrorCode::kIo, "TCP_NODELAY");
  }
}

void Socket::shutdown_both() noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Listener::Listener(std::uint16_t port, const std::string& bind_addr) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) raise_errno(ErrorCode::kIo, "socket");
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = make_addr(bind_addr, port);
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    const int err = errno;
    ::close(fd_);
    fd_ = -1;
    errno = err;
    raise_errno(ErrorCode::kIo, "bind port " + std::to_string(port));
  }
  if (::listen(fd_, 8) != 0) {
    ::close(fd_);
    fd_ = -1;
    raise_errno(ErrorCode::kIo, "listen");
  }
  socklen_t len = sizeof(addr);
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    raise_errno(ErrorCode::kIo, "getsockname");
  }
  port_ = ntohs(addr.sin_port);
}

Listener::~Listener() { close(); }

Listener::Listener(Listener&& other) noexcept
    : fd_(other.fd_.exchange(-1)), port_(other.port_) {}

Listener& Listener::operator=(Listener&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_.exchange(-1);
    port_ = other.port_;
  }
  return *this;
}

Socket Listener::accept(const std::atomic<bool>& stop) {
  while (!stop.load(std::memory_order_relaxed)) {
    const int fd = fd_.load(std::memory_order_relaxed);
    if (fd < 0) return Socket();
    pollfd pfd{fd, POLLIN, 0};
    const int r = ::poll(&pfd, 1, 50);
    if (r < 0) {
      if (errno == EINTR) continue;
      raise_errno(ErrorCode::kIo, "poll");
    }
    if (r == 0) continue;
    // close() may have taken the descriptor while we were polling; that is
    // a shutdown signal, not an error.
    if (pfd.revents & POLLNVAL) return Socket();
    const int client = ::accept(fd, nullptr, nullptr);
    if (client < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      if (errno == EBADF || errno == EINVAL) return Socket();
      raise_errno(ErrorCode::kIo, "accept");
    }
    return Socket(client);
  }
  return Socket();
}

void Listener::close() noexcept {
  const int fd = fd_.exchange(-1);
  if (fd >= 0) ::close(fd);
}

}  // namespace qkdtwin
