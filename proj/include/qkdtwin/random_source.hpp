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
#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "qkdtwin/chacha20.hpp"

namespace qkdtwin {

enum class SourceKind {
  kQrngEmulated,  // rate-limited uniform bit source standing in for a device
  kCsprng,        // keyed stream cipher, reseeded per run
};

struct Seed256 {
  std::array<std::uint8_t, 32> bytes{};

  /// Deterministic expansion of a 64-bit seed, for reproducible runs.
  static Seed256 from_u64(std::uint64_t v);
  /// Fresh key from the OS entropy pool.
  static Seed256 os_entropy();
};

/// A producer of uniform random bytes. fill may return fewer bytes than
/// requested when the source is rate limited; 0 means "dry right now".
class RandomBitSource {
 public:
  virtual ~RandomBitSource() = default;
  virtual std::size_t fill(std::span<std::uint8_t> out) = 0;
};

/// Deterministic keystream source. Always satisfies the full request.
class ChaChaSource : public RandomBitSource {
 public:
  explicit ChaChaSource(const Seed256& seed);
  std::size_t fill(std::span<std::uint8_t> out) override;

 private:
  ChaCha20 cipher_;
};

/// Token-bucket wrapper modeling a device with a bounded bit rate. Tokens
/// replenish against the monotonic clock up to burst_bytes.
class RateLimitedSource : public RandomBitSource {
 public:
  RateLimitedSource(std::unique_ptr<RandomBitSource> inner,
                    double bits_per_second, std::size_t burst_bytes = 65536);
  std::size_t fill(std::span<std::uint8_t> out) override;

 private:
  std::unique_ptr<RandomBitSource> inner_;
  double bytes_per_second_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

std::unique_ptr<RandomBitSource> make_source(SourceKind kind, const Seed256& seed,
                                             double qrng_bits_per_second = 2e8);

/// Draws nbits uniform bits as ceil(nbits/8) bytes; unused bits of a final
/// partial byte are zero. Retries a rate-limited source, but raises
/// SourceStall after stall_timeout without progress.
std::vector<std::uint8_t> produce_uniform(
    RandomBitSource& src, std::size_t nbits,
    std::chrono::milliseconds stall_timeout = std::chrono::milliseconds(5000));

}  // namespace qkdtwin
