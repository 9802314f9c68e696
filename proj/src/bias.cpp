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

#include "qkdtwin/bias.hpp"

#include <algorithm>
#include <cmath>

#include "qkdtwin/errors.hpp"

namespace qkdtwin {

namespace {

void validate_probs(const std::array<double, 3>& p, unsigned resolution_bits,
                    const char* label) {
  double sum = 0;
  for (double v : p) {
    if (v < 0.0 || v > 1.0) {
      raise(ErrorCode::kInvalidConfig,
            std::string(label) + " probabilities must lie in [0,1]");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > std::ldexp(1.0, -static_cast<int>(resolution_bits))) {
    raise(ErrorCode::kInvalidConfig,
          std::string(label) + " probabilities must sum to 1 (got " +
              std::to_string(sum) + ")");
  }
}

/// LSB-first bit cursor over a byte span.
class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t take(unsigned nbits) {
    std::uint32_t v = 0;
    for (unsigned i = 0; i < nbits; ++i) {
      const std::uint8_t bit = (bytes_[pos_ >> 3] >> (pos_ & 7)) & 1u;
      v |= static_cast<std::uint32_t>(bit) << i;
      ++pos_;
    }
    return v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::uint8_t categorize(std::uint32_t u,
                               const std::array<std::uint32_t, 3>& th) {
  return u < th[0] ? 0 : (u < th[1] ? 1 : 2);
}

}  // namespace

void BiasConfig::validate() const {
  if (resolution_bits < 1 || resolution_bits > 30) {
    raise(ErrorCode::kInvalidConfig, "resolution_bits must be in [1,30]");
  }
  validate_probs(p_pol, resolution_bits, "pol");
  validate_probs(p_decoy, resolution_bits, "decoy");
}

std::array<std::uint32_t, 3> bias_thresholds(const std::array<double, 3>& p,
                                             unsigned resolution_bits) {
  const auto scale = static_cast<double>(1u << resolution_bits);
  const auto full = static_cast<std::uint32_t>(1u << resolution_bits);
  std::array<std::uint32_t, 3> th{};
  th[0] = static_cast<std::uint32_t>(
      std::min<long long>(std::llround(p[0] * scale), full));
  th[1] = static_cast<std::uint32_t>(
      std::min<long long>(std::llround((p[0] + p[1]) * scale), full));
  th[1] = std::max(th[1], th[0]);
  th[2] = full;
  return th;
}

std::vector<std::uint8_t> bias_symbols(std::span<const std::uint8_t> uniform,
                                       const BiasConfig& cfg,
                                       SymbolCategory category, std::size_t n) {
  cfg.validate();
  const std::size_t need = (n * cfg.resolution_bits + 7) / 8;
  if (uniform.size() < need) {
    raise(ErrorCode::kInsufficientEntropy,
          "need " + std::to_string(need) + " uniform bytes, have " +
              std::to_string(uniform.size()));
  }
  const auto th = bias_thresholds(cfg.probs(category), cfg.resolution_bits);
  std::vector<std::uint8_t> codes(n);
  BitReader reader(uniform);
  for (std::size_t i = 0; i < n; ++i) {
    codes[i] = categorize(reader.take(cfg.resolution_bits), th);
  }
  return codes;
}

void bias_pack_symbols(RandomBitSource& src,
                       const std::array<std::uint32_t, 3>& thresholds,
                       unsigned resolution_bits, std::size_t n,
                       std::span<std::uint8_t> out,
                       std::chrono::milliseconds stall_timeout) {
  if (out.size() < (n + 3) / 4) {
    raise(ErrorCode::kLengthError, "output span too small for packed symbols");
  }
  std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>((n + 3) / 4),
            std::uint8_t{0});
  // Symbols are drawn in groups so the raw buffer stays cache sized. Group
  // size is a multiple of 4 to keep packing byte aligned between groups.
  constexpr std::size_t kGroup = 16384;
  std::size_t done = 0;
  while (done < n) {
    const std::size_t take = std::min(kGroup, n - done);
    const auto raw = produce_uniform(src, take * resolution_bits, stall_timeout);
    std::uint8_t* dst = out.data() + done / 4;
    if (resolution_bits == 16) {
      for (std::size_t i = 0; i < take; ++i) {
        const std::uint32_t u = static_cast<std::uint32_t>(raw[2 * i]) |
                                static_cast<std::uint32_t>(raw[2 * i + 1]) << 8;
        dst[i / 4] |= static_cast<std::uint8_t>(categorize(u, thresholds)
                                                << (2 * (i % 4)));
      }
    } else if (resolution_bits == 8) {
      for (std::size_t i = 0; i < take; ++i) {
        dst[i / 4] |= static_cast<std::uint8_t>(categorize(raw[i], thresholds)
                                                << (2 * (i % 4)));
      }
    } else {
      BitReader reader(raw);
      for (std::size_t i = 0; i < take; ++i) {
        const std::uint32_t u = reader.take(resolution_bits);
        dst[i / 4] |= static_cast<std::uint8_t>(categorize(u, thresholds)
                                                << (2 * (i % 4)));
      }
    }
    done += take;
  }
}

}  // namespace qkdtwin
