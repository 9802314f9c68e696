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
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "qkdtwin/encoding.hpp"
#include "qkdtwin/retention.hpp"

namespace qkdtwin {

struct ChannelConfig {
  double transmittance = 1.0;    // channel loss factor in [0,1]
  double efficiency = 1.0;       // detector efficiency in [0,1]
  double dark_count_prob = 0.0;  // per-slot dark click probability
  std::uint64_t seed = 1;
  void validate() const;
};

/// Per-slot lossy channel and detector: a non-vacuum pulse is detected
/// with probability transmittance x efficiency, plus dark counts; vacuum
/// slots click only on dark counts. One RNG draw per slot, so results are
/// reproducible for a given seed independent of call batching.
class ChannelModel {
 public:
  explicit ChannelModel(ChannelConfig cfg);

  bool detect(bool vacuum);
  const ChannelConfig& config() const { return cfg_; }

 private:
  ChannelConfig cfg_;
  double p_signal_;  // detection probability of a non-vacuum slot
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> uni_{0.0, 1.0};
};

/// Detected slot indices for a frame sequence starting at frames[0] =
/// slot frames[0].slot_index.
std::vector<std::uint64_t> transmit_through(std::span<const PulseFrame> frames,
                                            ChannelModel& ch);

enum class Basis : std::uint8_t { kZ = 0, kX = 1 };

struct MeasurementConfig {
  double basis_z_prob = 0.5;  // probability of measuring in the key basis
  double flip_prob = 0.0;     // extra outcome noise, for QBER injection
  std::uint64_t seed = 2;
  void validate() const;
};

struct MeasurementRecord {
  std::uint64_t slot = 0;
  std::uint8_t basis = 0;    // Basis enum value
  std::uint8_t outcome = 0;  // Z: measured bit; X: 0 = diagonal state seen
  friend bool operator==(const MeasurementRecord&, const MeasurementRecord&) = default;
};

/// Three-state measurement: polarization codes 0 and 1 are the key-basis
/// states, code 2 the single check-basis state. A matched basis yields the
/// sent state deterministically (before flip noise); a mismatched basis
/// yields a fair coin. Each measurement consumes a fixed number of RNG
/// draws, so streams replay identically whatever the detection pattern.
class MeasurementModel {
 public:
  explicit MeasurementModel(MeasurementConfig cfg);

  MeasurementRecord measure(std::uint64_t slot, std::uint8_t pol_code);
  /// A dark-count click carries no signal: random outcome in any basis.
  MeasurementRecord measure_dark(std::uint64_t slot);

  const MeasurementConfig& config() const { return cfg_; }

 private:
  MeasurementConfig cfg_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> uni_{0.0, 1.0};
};

struct SiftStats {
  std::uint64_t sifted = 0;   // pairs compared (vacuum slots excluded)
  std::uint64_t matched = 0;  // basis matched the sent state's basis
  std::uint64_t errors = 0;   // outcome disagreed within matched set
  std::optional<double> qber;
};

/// Joins the transmitter's sifted pairs with the receiver's local records
/// (same slots, same order) and computes the error rate over
/// basis-matched, non-vacuum detections. Throws IndexMismatch when the
/// slot lists disagree.
SiftStats compute_stats(std::span<const SiftedPair> sifted,
                        std::span<const MeasurementRecord> records);

}  // namespace qkdtwin
