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
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qkdtwin/channel_model.hpp"
#include "qkdtwin/command_session.hpp"
#include "qkdtwin/encoding.hpp"
#include "qkdtwin/qsc.hpp"

namespace qkdtwin {

struct ReceiverConfig {
  ChannelConfig channel{};
  MeasurementConfig measurement{};
  /// Detection reports cover fixed windows of this many slots.
  std::uint64_t report_interval_slots = 1'000'000;
  /// Attach the measurement basis byte per index to each report.
  bool include_basis = false;
  SymbolPositionMaps maps{};
  std::string board_addr = "127.0.0.1";
  std::uint16_t detections_port = 7003;
  std::string auth_token;
};

/// The measurement side. Pulse frames arrive over the optical path (a
/// direct sink call; light is not a network protocol), pass through the
/// lossy channel and measurement models, and come back to the transmitter
/// as batched detection reports naming slots only. Outcomes stay local
/// until the run ends and the operator compares notes out of band.
class ReceiverTwin : public FrameSink {
 public:
  explicit ReceiverTwin(ReceiverConfig cfg);
  ~ReceiverTwin() override;
  ReceiverTwin(const ReceiverTwin&) = delete;
  ReceiverTwin& operator=(const ReceiverTwin&) = delete;

  /// Dials the board's detections socket. The explicit form overrides
  /// the configured endpoint (the board may sit on an ephemeral port
  /// assigned after this object was built).
  void connect();
  void connect(const std::string& addr, std::uint16_t port);

  /// FrameSink hook; runs on the board's emulator thread. Frames must
  /// arrive in slot order.
  void on_frame(const PulseFrame& frame) override;

  /// Flushes the remaining windows up to total_slots (every window is
  /// reported, detections or not, so the transmitter's coverage watermark
  /// reaches the end of the run).
  void finish(std::uint64_t total_slots);

  const std::vector<MeasurementRecord>& records() const { return records_; }
  std::uint64_t detections() const { return records_.size(); }
  std::uint64_t reports_sent() const { return reports_sent_; }

  void shutdown();

 private:
  void flush(std::uint64_t begin, std::uint64_t end);

  ReceiverConfig cfg_;
  ChannelModel channel_;
  MeasurementModel measurement_;
  std::array<std::uint8_t, 3> pol_from_position_{};

  std::shared_ptr<CommandSession> session_;

  std::vector<MeasurementRecord> records_;
  std::vector<std::uint64_t> window_indices_;
  std::vector<std::uint8_t> window_basis_;
  std::uint64_t window_begin_ = 0;
  std::uint64_t reports_sent_ = 0;
};

}  // namespace qkdtwin
