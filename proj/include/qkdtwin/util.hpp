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

#include <cstdint>
#include <cstddef>
#include <span>
#include <vector>

namespace qkdtwin {

/// Streaming FNV-1a 64-bit hash. Used for end-to-end exactness checks
/// (produced byte stream vs. consumed byte stream).
class Fnv1a64 {
 public:
  void update(std::span<const std::uint8_t> bytes) noexcept {
    std::uint64_t h = hash_;
    for (std::uint8_t b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
    hash_ = h;
  }

  void update_word(std::uint32_t word) noexcept {
    std::uint64_t h = hash_;
    for (int i = 0; i < 4; ++i) {
      h ^= (word >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
    hash_ = h;
  }

  std::uint64_t digest() const noexcept { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

/// Byte stream to 32-bit words, little endian: word i = bytes 4i..4i+3,
/// low byte first. The whole data path shares this convention, so a word
/// consumed low-bits-first yields the symbols in byte-stream order.
inline void words_from_bytes_le(std::span<const std::uint8_t> bytes,
                                std::span<std::uint32_t> words) noexcept {
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::uint8_t* p = bytes.data() + 4 * i;
    words[i] = static_cast<std::uint32_t>(p[0]) |
               static_cast<std::uint32_t>(p[1]) << 8 |
               static_cast<std::uint32_t>(p[2]) << 16 |
               static_cast<std::uint32_t>(p[3]) << 24;
  }
}

inline std::vector<std::uint8_t> bytes_from_words_le(
    std::span<const std::uint32_t> words) {
  std::vector<std::uint8_t> out(words.size() * 4);
  for (std::size_t i = 0; i < words.size(); ++i) {
    out[4 * i] = static_cast<std::uint8_t>(words[i]);
    out[4 * i + 1] = static_cast<std::uint8_t>(words[i] >> 8);
    out[4 * i + 2] = static_cast<std::uint8_t>(words[i] >> 16);
    out[4 * i + 3] = static_cast<std::uint8_t>(words[i] >> 24);
  }
  return out;
}

/// splitmix64 step; the standard seed-expansion primitive for deriving
/// independent sub-seeds from a single master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace qkdtwin
