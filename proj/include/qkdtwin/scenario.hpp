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
#include <string>
#include <vector>

#include "qkdtwin/bias.hpp"
#include "qkdtwin/channel_model.hpp"
#include "qkdtwin/encoding.hpp"
#include "qkdtwin/metrics.hpp"
#include "qkdtwin/random_source.hpp"
#include "qkdtwin/stream_engine.hpp"

namespace qkdtwin {

enum class ScenarioMode : std::uint8_t {
  kTxLoopback,   // full transmitter chain, pulses discarded at the fiber
  kTxRxFull,     // adds the channel, detectors and sifting round trip
  kQrngBottomUp, // photon-counting harvest into the block memory
  kSoak,         // loopback arrangement intended for long paced runs
};

enum class TimeModel : std::uint8_t {
  kAsFastAsPossible,   // blocking handshakes, no wall-clock pacing
  kRealTimeThrottled,  // slots paced to the configured repetition rate
};

ScenarioMode parse_mode(const std::string& text);
TimeModel parse_time_model(const std::string& text);
const char* to_string(ScenarioMode m) noexcept;
const char* to_string(TimeModel t) noexcept;

struct ScenarioConfig {
  ScenarioMode mode = ScenarioMode::kTxLoopback;
  TimeModel time_model = TimeModel::kAsFastAsPossible;
  /// Run length in emitted-slot time; n_slots overrides it when nonzero.
  double duration_s = 1.0;
  std::uint64_t n_slots = 0;
  /// All per-run randomness derives from this one value.
  std::uint64_t master_seed = 1;
  /// Report directory; empty skips the report files.
  std::string out_dir;

  std::string bind_addr = "127.0.0.1";
  // Port 0 picks an ephemeral port (the in-process default). The CLI
  // fills in the conventional 7000..7003 block instead.
  std::uint16_t command_port = 0;
  std::uint16_t pol_port = 0;
  std::uint16_t decoy_port = 0;
  std::uint16_t detections_port = 0;

  ClockConfig clock{200'000'000, 4};
  ChannelOffsets offsets{};
  RingBufferConfig ring{};
  std::size_t bram_words = 32'768;
  BiasConfig bias{};
  /// Retained chunks per stream; 0 keeps the RetentionConfig default.
  std::size_t retention_chunks = 0;

  SourceKind source_kind = SourceKind::kCsprng;
  double qrng_bits_per_second = 2e8;

  ChannelConfig channel{};
  MeasurementConfig measurement{};
  std::uint64_t report_interval_slots = 1'000'000;
  bool include_basis = false;
  double qber_threshold = 0.05;

  /// Block-server fault injection (see SourceConfig).
  double stall_at_s = -1.0;
  double stall_seconds = 0.0;

  std::string auth_token;

  /// Photon-counting harvest parameters.
  double qrng_edge_rate_hz = 5e6;     // mean edge rate per input channel
  std::uint64_t qrng_bits = 1u << 21; // rounded up to whole memory halves
  std::uint32_t qrng_window_ticks = 4;

  /// Overall watchdogs; 0 picks a mode-appropriate default.
  double preload_timeout_s = 0.0;
  double run_timeout_s = 0.0;

  void validate() const;
};

/// Parses `key=value` lines (#-comments and blank lines skipped).
/// Unknown keys are an error.
ScenarioConfig parse_scenario_file(const std::string& path);
/// Applies one key=value override to an existing config.
void apply_key_value(ScenarioConfig& cfg, const std::string& key,
                     const std::string& value);
/// QKDTWIN_COMMAND_PORT / QKDTWIN_POL_PORT / QKDTWIN_DECOY_PORT /
/// QKDTWIN_DETECTIONS_PORT / QKDTWIN_BIND_ADDR, when set, win over the file.
void apply_env_overrides(ScenarioConfig& cfg);

struct ScenarioResult {
  RunStats stats;
  std::vector<SecondSample> samples;
  int exit_code = 0;
  std::string failure;  // empty on success
};

/// Runs one scenario to completion, writing reports when configured.
ScenarioResult run_scenario(const ScenarioConfig& cfg);

}  // namespace qkdtwin
