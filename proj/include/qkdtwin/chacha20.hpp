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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace qkdtwin {

/// ChaCha20 keystream generator (20 rounds, 32-bit block counter, 96-bit
/// nonce). Used purely as a deterministic randomness expander, not for
/// encryption: callers draw keystream bytes and never feed plaintext.
class ChaCha20 {
 public:
  static constexpr std::size_t kKeyBytes = 32;
  static constexpr std::size_t kNonceBytes = 12;
  static constexpr std::size_t kBlockBytes = 64;

  ChaCha20(std::span<const std::uint8_t> key, std::span<const std::uint8_t> nonce,
           std::uint32_t counter = 0);

  /// Fills out with the next keystream bytes.
  void keystream(std::span<std::uint8_t> out);

  /// Block counter of the next unread block (for diagnostics).
  std::uint32_t counter() const { return state_[12]; }

  /// One raw block: 64 keystream bytes from an explicit 16-word state.
  static void block(const std::uint32_t state[16], std::uint8_t out[kBlockBytes]);

 private:
  std::array<std::uint32_t, 16> state_;
  std::array<std::uint8_t, kBlockBytes> buf_;
  std::size_t buf_pos_ = kBlockBytes;  // buffered bytes start here; 64 = empty
};

}  // namespace qkdtwin
