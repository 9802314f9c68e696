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
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qkdtwin/errors.hpp"

namespace qkdtwin {

/// Intensity levels of the decoy modulation. kVacuum means the laser is not
/// fired at all for that slot.
enum class Intensity : std::uint8_t { kHigh = 0, kLow = 1, kVacuum = 2 };

/// The 2-bit code 0b11 is reserved in both symbol alphabets.
inline constexpr std::uint8_t kReservedCode = 3;

/// One of the three polarization states, as a validated 2-bit code.
class PolarizationSymbol {
 public:
  explicit PolarizationSymbol(std::uint8_t code) : code_(code) {
    if (code > 2) raise(ErrorCode::kInvalidSymbol, "polarization code 0b11 is reserved");
  }
  std::uint8_t code() const noexcept { return code_; }
  friend bool operator==(PolarizationSymbol, PolarizationSymbol) = default;

 private:
  std::uint8_t code_;
};

/// One of the three intensity levels, as a validated 2-bit code.
class DecoySymbol {
 public:
  explicit DecoySymbol(std::uint8_t code) : code_(code) {
    if (code > 2) raise(ErrorCode::kInvalidSymbol, "decoy code 0b11 is reserved");
  }
  explicit DecoySymbol(Intensity level) : code_(static_cast<std::uint8_t>(level)) {}
  std::uint8_t code() const noexcept { return code_; }
  Intensity level() const noexcept { return static_cast<Intensity>(code_); }
  bool vacuum() const noexcept { return level() == Intensity::kVacuum; }
  friend bool operator==(DecoySymbol, DecoySymbol) = default;

 private:
  std::uint8_t code_;
};

/// The two+two bit encoding of one qubit slot.
struct QubitSymbolPair {
  PolarizationSymbol pol;
  DecoySymbol decoy;
  friend bool operator==(const QubitSymbolPair&, const QubitSymbolPair&) = default;
};

/// System clock and slot geometry. The default 200 MHz clock gives 5 ns
/// ticks; three ticks make the minimal 15 ns slot, four ticks give a 20 ns
/// slot and a 50 MHz repetition rate.
struct ClockConfig {
  std::uint64_t clock_hz = 200'000'000;
  std::uint32_t slot_ticks = 3;

  double tick_ns() const noexcept { return 1e9 / static_cast<double>(clock_hz); }
  double repetition_hz() const noexcept {
    return static_cast<double>(clock_hz) / static_cast<double>(slot_ticks);
  }

  /// Throws on hard violations (slot too short for three positions); returns
  /// human-readable warnings for soft ones (clock outside the supported
  /// 100-200 MHz range).
  std::vector<std::string> validate() const;
};

/// Per-output-line tick offsets, compensating different electrical/optical
/// path lengths downstream of the chip.
struct ChannelOffsets {
  std::uint32_t laser = 0;
  std::uint32_t pol = 0;
  std::uint32_t intensity = 0;
  /// Offsets must stay below slot_ticks * max_lookahead.
  std::uint32_t max_lookahead = 4;

  void validate(const ClockConfig& cfg) const;
};

/// Symbol-code to temporal-position tables. The defaults are the documented
/// convention (code 0b00 fires position 0 and so on); both tables can be
/// overridden by configuration.
struct SymbolPositionMaps {
  std::array<std::uint8_t, 3> pol_position{0, 1, 2};
  std::array<std::uint8_t, 2> intensity_position{0, 1};  // indexed by HIGH, LOW
};

/// One pulse on one output line: the base temporal position within the slot
/// and the actual tick after the line offset was applied.
struct LinePulse {
  std::uint8_t position = 0;
  std::uint32_t tick = 0;
  friend bool operator==(const LinePulse&, const LinePulse&) = default;
};

/// Electrical output description for one slot. The laser line fires at
/// position 0 of every slot except vacuum-decoy ones; the polarization line
/// fires in one of three positions; the intensity line in one of two, or not
/// at all for vacuum.
struct PulseFrame {
  std::uint64_t slot_index = 0;
  std::optional<LinePulse> laser;
  LinePulse pol;
  std::optional<LinePulse> intensity;
  friend bool operator==(const PulseFrame&, const PulseFrame&) = default;
};

/// How to treat the reserved 0b11 code when extracting symbols from packed
/// bytes: hard error, or map to code 0 and count.
enum class SymbolPolicy { kStrict, kLenient };

/// Packs 2-bit symbol codes four to a byte, LSB first: symbol i occupies
/// bits [2i, 2i+2) of byte i/4. A final partial byte is zero padded.
std::vector<std::uint8_t> pack_symbols(std::span<const std::uint8_t> codes);

/// Inverse of pack_symbols over the first `count` symbols.
std::vector<std::uint8_t> unpack_symbols(std::span<const std::uint8_t> bytes,
                                         std::size_t count,
                                         SymbolPolicy policy = SymbolPolicy::kStrict,
                                         std::uint64_t* reserved_count = nullptr);

/// Builds the pulse schedule for one symbol pair.
PulseFrame encode_pair(const QubitSymbolPair& pair, const ClockConfig& cfg,
                       const ChannelOffsets& offsets,
                       const SymbolPositionMaps& maps = {});

/// Same as encode_pair but from raw 2-bit codes, with an explicit slot index.
PulseFrame encode_codes(std::uint8_t pol_code, std::uint8_t decoy_code,
                        std::uint64_t slot_index, const ClockConfig& cfg,
                        const ChannelOffsets& offsets,
                        const SymbolPositionMaps& maps = {});

/// Builds frames 0..n-1 from two packed byte streams consumed at identical
/// rates (exactly ceil(n/4) bytes each).
std::vector<PulseFrame> frame_stream(std::span<const std::uint8_t> pol_bytes,
                                     std::span<const std::uint8_t> decoy_bytes,
                                     const ClockConfig& cfg,
                                     const ChannelOffsets& offsets, std::size_t n,
                                     const SymbolPositionMaps& maps = {});

}  // namespace qkdtwin
