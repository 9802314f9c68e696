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

#include "qkdtwin/chacha20.hpp"

#include <cstring>

#include "qkdtwin/errors.hpp"

namespace qkdtwin {

namespace {

inline std::uint32_t rotl(std::uint32_t v, int n) {
  return (v << n) | (v >> (32 - n));
}

inline std::uint32_t load_le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 |
         static_cast<std::uint32_t>(p[3]) << 24;
}

inline void store_le32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
  p[2] = static_cast<std::uint8_t>(v >> 16);
  p[3] = static_cast<std::uint8_t>(v >> 24);
}

#define QKDTWIN_QR(a, b, c, d)      \
  do {                              \
    a += b; d ^= a; d = rotl(d, 16); \
    c += d; b ^= c; b = rotl(b, 12); \
    a += b; d ^= a; d = rotl(d, 8);  \
    c += d; b ^= c; b = rotl(b, 7);  \
  } while (0)

}  // namespace

ChaCha20::ChaCha20(std::span<const std::uint8_t> key,
                   std::span<const std::uint8_t> nonce, std::uint32_t counter) {
  if (key.size() != kKeyBytes) {
    raise(ErrorCode::kInvalidConfig, "key must be 32 bytes");
  }
  if (nonce.size() != kNonceBytes) {
    raise(ErrorCode::kInvalidConfig, "nonce must be 12 bytes");
  }
  state_[0] = 0x61707865;
  state_[1] = 0x3320646e;
  state_[2] = 0x79622d32;
  state_[3] = 0x6b206574;
  for (int i = 0; i < 8; ++i) state_[4 + i] = load_le32(key.data() + 4 * i);
  state_[12] = counter;
  for (int i = 0; i < 3; ++i) state_[13 + i] = load_le32(nonce.data() + 4 * i);
}

void ChaCha20::block(const std::uint32_t state[16], std::uint8_t out[kBlockBytes]) {
  std::uint32_t x[16];
  std::memcpy(x, state, sizeof(x));
  for (int round = 0; round < 10; ++round) {
    QKDTWIN_QR(x[0], x[4], x[8], x[12]);
    QKDTWIN_QR(x[1], x[5], x[9], x[13]);
    QKDTWIN_QR(x[2], x[6], x[10], x[14]);
    QKDTWIN_QR(x[3], x[7], x[11], x[15]);
    QKDTWIN_QR(x[0], x[5], x[10], x[15]);
    QKDTWIN_QR(x[1], x[6], x[11], x[12]);
    QKDTWIN_QR(x[2], x[7], x[8], x[13]);
    QKDTWIN_QR(x[3], x[4], x[9], x[14]);
  }
  for (int i = 0; i < 16; ++i) store_le32(out + 4 * i, x[i] + state[i]);
}

void ChaCha20::keystream(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  // Drain any partially consumed block first.
  while (done < out.size() && buf_pos_ < kBlockBytes) {
    out[done++] = buf_[buf_pos_++];
  }
  // Whole blocks straight into the caller's buffer.
  while (out.size() - done >= kBlockBytes) {
    block(state_.data(), out.data() + done);
    ++state_[12];
    done += kBlockBytes;
  }
  if (done < out.size()) {
    block(state_.data(), buf_.data());
    ++state_[12];
    buf_pos_ = 0;
    while (done < out.size()) out[done++] = buf_[buf_pos_++];
  }
}

}  // namespace qkdtwin
