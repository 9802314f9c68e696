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

#include "qkdtwin/encoding.hpp"

namespace qkdtwin {

std::vector<std::string> ClockConfig::validate() const {
  if (clock_hz == 0) raise(ErrorCode::kInvalidConfig, "clock_hz must be nonzero");
  if (slot_ticks < 3) {
    raise(ErrorCode::kInvalidConfig,
          "slot_ticks must be >= 3 so the three polarization positions fit");
  }
  std::vector<std::string> warnings;
  if (clock_hz < 100'000'000 || clock_hz > 200'000'000) {
    warnings.push_back("clock_hz " + std::to_string(clock_hz) +
                       " is outside the supported 100-200 MHz range");
  }
  return warnings;
}

void ChannelOffsets::validate(const ClockConfig& cfg) const {
  const std::uint64_t bound =
      static_cast<std::uint64_t>(cfg.slot_ticks) * max_lookahead;
  for (std::uint32_t off : {laser, pol, intensity}) {
    if (off >= bound) {
      raise(ErrorCode::kInvalidConfig,
            "line offset " + std::to_string(off) + " exceeds lookahead bound " +
                std::to_string(bound));
    }
  }
}

std::vector<std::uint8_t> pack_symbols(std::span<const std::uint8_t> codes) {
  std::vector<std::uint8_t> out((codes.size() + 3) / 4, 0);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const std::uint8_t c = codes[i];
    if (c > 2) {
      raise(ErrorCode::kInvalidSymbol,
            "reserved code 0b11 at symbol " + std::to_string(i));
    }
    out[i / 4] |= static_cast<std::uint8_t>(c << (2 * (i % 4)));
  }
  return out;
}

std::vector<std::uint8_t> unpack_symbols(std::span<const std::uint8_t> bytes,
                                         std::size_t count, SymbolPolicy policy,
                                         std::uint64_t* reserved_count) {
  if (count > bytes.size() * 4) {
    raise(ErrorCode::kLengthError,
          "requested " + std::to_string(count) + " symbols from " +
              std::to_string(bytes.size()) + " bytes");
  }
  std::vector<std::uint8_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint8_t c = (bytes[i / 4] >> (2 * (i % 4))) & 0x3;
    if (c == kReservedCode) {
      if (policy == SymbolPolicy::kStrict) {
        raise(ErrorCode::kInvalidSymbol,
              "reserved code 0b11 at symbol " + std::to_string(i));
      }
      c = 0;
      if (reserved_count != nullptr) ++*reserved_count;
    }
    out[i] = c;
  }
  return out;
}

PulseFrame encode_codes(std::uint8_t pol_code, std::uint8_t decoy_code,
                        std::uint64_t slot_index, const ClockConfig& cfg,
                        const ChannelOffsets& offsets,
                        const SymbolPositionMaps& maps) {
  if (pol_code > 2 || decoy_code > 2) {
    raise(ErrorCode::kInvalidSymbol, "reserved code 0b11 in slot " +
                                         std::to_string(slot_index));
  }
  if (cfg.slot_ticks < 3) {
    raise(ErrorCode::kInvalidConfig, "slot_ticks must be >= 3");
  }

  PulseFrame frame;
  frame.slot_index = slot_index;

  const std::uint8_t pol_pos = maps.pol_position[pol_code];
  frame.pol = LinePulse{pol_pos, pol_pos + offsets.pol};

  if (static_cast<Intensity>(decoy_code) == Intensity::kVacuum) {
    // Laser switched off for this slot; no intensity pulse either.
    return frame;
  }
  frame.laser = LinePulse{0, offsets.laser};
  const std::uint8_t int_pos = maps.intensity_position[decoy_code];
  frame.intensity = LinePulse{int_pos, int_pos + offsets.intensity};
  return frame;
}

PulseFrame encode_pair(const QubitSymbolPair& pair, const ClockConfig& cfg,
                       const ChannelOffsets& offsets,
                       const SymbolPositionMaps& maps) {
  return encode_codes(pair.pol.code(), pair.decoy.code(), 0, cfg, offsets, maps);
}

std::vector<PulseFrame> frame_stream(std::span<const std::uint8_t> pol_bytes,
                                     std::span<const std::uint8_t> decoy_bytes,
                                     const ClockConfig& cfg,
                                     const ChannelOffsets& offsets, std::size_t n,
                                     const SymbolPositionMaps& maps) {
  const std::size_t need_bytes = (n + 3) / 4;
  if (pol_bytes.size() < need_bytes || decoy_bytes.size() < need_bytes) {
    raise(ErrorCode::kLengthMismatch,
          "need " + std::to_string(need_bytes) + " bytes per stream, have " +
              std::to_string(pol_bytes.size()) + " and " +
              std::to_string(decoy_bytes.size()));
  }
  const auto pol = unpack_symbols(pol_bytes.first(need_bytes), n);
  const auto decoy = unpack_symbols(decoy_bytes.first(need_bytes), n);
  std::vector<PulseFrame> frames;
  frames.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    frames.push_back(encode_codes(pol[i], decoy[i], i, cfg, offsets, maps));
  }
  return frames;
}

}  // namespace qkdtwin
