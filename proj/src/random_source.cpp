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

#include "qkdtwin/random_source.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "qkdtwin/errors.hpp"
#include "qkdtwin/util.hpp"

namespace qkdtwin {

namespace {
constexpr std::array<std::uint8_t, ChaCha20::kNonceBytes> kZeroNonce{};
}  // namespace

Seed256 Seed256::from_u64(std::uint64_t v) {
  Seed256 seed;
  std::uint64_t state = v;
  for (int i = 0; i < 4; ++i) {
    const std::uint64_t word = splitmix64(state);
    for (int b = 0; b < 8; ++b) {
      seed.bytes[8 * i + b] = static_cast<std::uint8_t>(word >> (8 * b));
    }
  }
  return seed;
}

Seed256 Seed256::os_entropy() {
  Seed256 seed;
  std::random_device rd;
  for (int i = 0; i < 8; ++i) {
    const std::uint32_t word = rd();
    for (int b = 0; b < 4; ++b) {
      seed.bytes[4 * i + b] = static_cast<std::uint8_t>(word >> (8 * b));
    }
  }
  return seed;
}

ChaChaSource::ChaChaSource(const Seed256& seed)
    : cipher_(seed.bytes, kZeroNonce, 0) {}

std::size_t ChaChaSource::fill(std::span<std::uint8_t> out) {
  cipher_.keystream(out);
  return out.size();
}

RateLimitedSource::RateLimitedSource(std::unique_ptr<RandomBitSource> inner,
                                     double bits_per_second,
                                     std::size_t burst_bytes)
    : inner_(std::move(inner)),
      bytes_per_second_(bits_per_second / 8.0),
      capacity_(static_cast<double>(burst_bytes)),
      tokens_(static_cast<double>(burst_bytes)),
      last_(std::chrono::steady_clock::now()) {
  if (bits_per_second <= 0) {
    raise(ErrorCode::kInvalidConfig, "rate must be positive");
  }
}

std::size_t RateLimitedSource::fill(std::span<std::uint8_t> out) {
  const auto now = std::chrono::steady_clock::now();
  const std::chrono::duration<double> dt = now - last_;
  last_ = now;
  tokens_ = std::min(capacity_, tokens_ + dt.count() * bytes_per_second_);
  const auto grant =
      std::min(out.size(), static_cast<std::size_t>(std::floor(tokens_)));
  if (grant == 0) return 0;
  tokens_ -= static_cast<double>(grant);
  return inner_->fill(out.first(grant));
}

std::unique_ptr<RandomBitSource> make_source(SourceKind kind, const Seed256& seed,
                                             double qrng_bits_per_second) {
  auto base = std::make_unique<ChaChaSource>(seed);
  if (kind == SourceKind::kCsprng) return base;
  return std::make_unique<RateLimitedSource>(std::move(base),
                                             qrng_bits_per_second);
}

std::vector<std::uint8_t> produce_uniform(RandomBitSource& src, std::size_t nbits,
                                          std::chrono::milliseconds stall_timeout) {
  std::vector<std::uint8_t> out((nbits + 7) / 8);
  std::size_t have = 0;
  auto last_progress = std::chrono::steady_clock::now();
  while (have < out.size()) {
    const std::size_t got =
        src.fill(std::span(out).subspan(have, out.size() - have));
    if (got > 0) {
      have += got;
      last_progress = std::chrono::steady_clock::now();
      continue;
    }
    if (std::chrono::steady_clock::now() - last_progress >= stall_timeout) {
      raise(ErrorCode::kSourceStall,
            "source produced nothing for " +
                std::to_string(stall_timeout.count()) + " ms (" +
                std::to_string(have) + "/" + std::to_string(out.size()) +
                " bytes)");
    }
    std::this_thread::sleep_for(std::chrono::microseconds(200));
  }
  if (nbits % 8 != 0 && !out.empty()) {
    out.back() &= static_cast<std::uint8_t>((1u << (nbits % 8)) - 1u);
  }
  return out;
}

}  // namespace qkdtwin
