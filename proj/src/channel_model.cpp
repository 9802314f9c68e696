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

#include "qkdtwin/channel_model.hpp"

#include "qkdtwin/errors.hpp"

namespace qkdtwin {

namespace {
void check_prob(double v, const char* name) {
  if (v < 0.0 || v > 1.0) {
    raise(ErrorCode::kInvalidConfig, std::string(name) + " must lie in [0,1]");
  }
}
}  // namespace

void ChannelConfig::validate() const {
  check_prob(transmittance, "transmittance");
  check_prob(efficiency, "efficiency");
  check_prob(dark_count_prob, "dark_count_prob");
}

ChannelModel::ChannelModel(ChannelConfig cfg) : cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
  const double p = cfg_.transmittance * cfg_.efficiency;
  p_signal_ = 1.0 - (1.0 - p) * (1.0 - cfg_.dark_count_prob);
}

bool ChannelModel::detect(bool vacuum) {
  const double p = vacuum ? cfg_.dark_count_prob : p_signal_;
  return uni_(rng_) < p;
}

std::vector<std::uint64_t> transmit_through(std::span<const PulseFrame> frames,
                                            ChannelModel& ch) {
  std::vector<std::uint64_t> detections;
  for (const PulseFrame& f : frames) {
    if (ch.detect(!f.laser.has_value())) detections.push_back(f.slot_index);
  }
  return detections;
}

void MeasurementConfig::validate() const {
  check_prob(basis_z_prob, "basis_z_prob");
  check_prob(flip_prob, "flip_prob");
}

MeasurementModel::MeasurementModel(MeasurementConfig cfg)
    : cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
}

MeasurementRecord MeasurementModel::measure(std::uint64_t slot,
                                            std::uint8_t pol_code) {
  if (pol_code > 2) {
    raise(ErrorCode::kInvalidSymbol, "polarization code out of range");
  }
  // Fixed draw pattern per measurement (basis, coin, flip), consumed
  // unconditionally, so replay does not depend on which branches are hit.
  const bool z = uni_(rng_) < cfg_.basis_z_prob;
  const std::uint8_t coin = uni_(rng_) < 0.5 ? 1 : 0;
  const bool flip = uni_(rng_) < cfg_.flip_prob;
  const bool matched = (z && pol_code < 2) || (!z && pol_code == 2);
  std::uint8_t raw;
  if (matched) {
    raw = z ? pol_code : 0;  // check basis: the diagonal state reads as 0
  } else {
    raw = coin;
  }
  MeasurementRecord rec;
  rec.slot = slot;
  rec.basis = z ? static_cast<std::uint8_t>(Basis::kZ)
                : static_cast<std::uint8_t>(Basis::kX);
  rec.outcome = static_cast<std::uint8_t>(raw ^ (flip ? 1 : 0));
  return rec;
}

MeasurementRecord MeasurementModel::measure_dark(std::uint64_t slot) {
  const bool z = uni_(rng_) < cfg_.basis_z_prob;
  const std::uint8_t coin = uni_(rng_) < 0.5 ? 1 : 0;
  const bool flip = uni_(rng_) < cfg_.flip_prob;
  MeasurementRecord rec;
  rec.slot = slot;
  rec.basis = z ? static_cast<std::uint8_t>(Basis::kZ)
                : static_cast<std::uint8_t>(Basis::kX);
  rec.outcome = static_cast<std::uint8_t>(coin ^ (flip ? 1 : 0));
  return rec;
}

SiftStats compute_stats(std::span<const SiftedPair> sifted,
                        std::span<const MeasurementRecord> records) {
  if (sifted.size() != records.size()) {
    raise(ErrorCode::kIndexMismatch,
          "sifted pairs (" + std::to_string(sifted.size()) +
              ") and receiver records (" + std::to_string(records.size()) +
              ") differ in length");
  }
  SiftStats stats;
  for (std::size_t i = 0; i < sifted.size(); ++i) {
    const SiftedPair& s = sifted[i];
    const MeasurementRecord& r = records[i];
    if (s.slot != r.slot) {
      raise(ErrorCode::kIndexMismatch,
            "slot mismatch at entry " + std::to_string(i) + ": " +
                std::to_string(s.slot) + " vs " + std::to_string(r.slot));
    }
    if (s.decoy_code == static_cast<std::uint8_t>(Intensity::kVacuum)) {
      continue;  // dark click on an empty slot; no key material
    }
    ++stats.sifted;
    const bool z = r.basis == static_cast<std::uint8_t>(Basis::kZ);
    const bool matched = (z && s.pol_code < 2) || (!z && s.pol_code == 2);
    if (!matched) continue;
    ++stats.matched;
    const std::uint8_t expected = z ? s.pol_code : 0;
    if (r.outcome != expected) ++stats.errors;
  }
  if (stats.matched > 0) {
    stats.qber = static_cast<double>(stats.errors) /
                 static_cast<double>(stats.matched);
  }
  return stats;
}

}  // namespace qkdtwin
