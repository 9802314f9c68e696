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

#include "qkdtwin/receiver_twin.hpp"

#include "json.hpp"
#include "qkdtwin/errors.hpp"
#include "qkdtwin/tcp.hpp"
#include "qkdtwin/wire.hpp"

namespace qkdtwin {

ReceiverTwin::ReceiverTwin(ReceiverConfig cfg)
    : cfg_(std::move(cfg)),
      channel_(cfg_.channel),
      measurement_(cfg_.measurement) {
  if (cfg_.report_interval_slots == 0) {
    raise(ErrorCode::kInvalidConfig, "report interval must be positive");
  }
  // Invert the code-to-position map so frames can be read back.
  for (std::uint8_t code = 0; code < 3; ++code) {
    pol_from_position_[cfg_.maps.pol_position[code]] = code;
  }
}

ReceiverTwin::~ReceiverTwin() { shutdown(); }

void ReceiverTwin::shutdown() {
  if (session_) {
    session_->close();
    session_.reset();
  }
}

void ReceiverTwin::connect() {
  connect(cfg_.board_addr, cfg_.detections_port);
}

void ReceiverTwin::connect(const std::string& addr, std::uint16_t port) {
  Socket sock = Socket::connect_to(addr, port);
  session_ = std::make_shared<CommandSession>(
      std::move(sock), [](const CommandFrame&) -> CommandFrame {
        raise(ErrorCode::kProtocol, "the receiver accepts no requests");
      });
  if (!cfg_.auth_token.empty()) {
    nlohmann::json j;
    j["auth_token"] = cfg_.auth_token;
    session_->request_ok(Opcode::kSetParam, json_payload(j.dump()));
  }
}

void ReceiverTwin::on_frame(const PulseFrame& frame) {
  const std::uint64_t slot = frame.slot_index;
  while (slot >= window_begin_ + cfg_.report_interval_slots) {
    flush(window_begin_, window_begin_ + cfg_.report_interval_slots);
    window_begin_ += cfg_.report_interval_slots;
  }

  const bool vacuum = !frame.laser.has_value();
  if (!channel_.detect(vacuum)) return;

  MeasurementRecord rec =
      vacuum ? measurement_.measure_dark(slot)
             : measurement_.measure(slot, pol_from_position_[frame.pol.position]);
  records_.push_back(rec);
  window_indices_.push_back(slot);
  if (cfg_.include_basis) window_basis_.push_back(rec.basis);
}

void ReceiverTwin::finish(std::uint64_t total_slots) {
  while (window_begin_ < total_slots) {
    std::uint64_t end =
        std::min(window_begin_ + cfg_.report_interval_slots, total_slots);
    flush(window_begin_, end);
    window_begin_ = end;
  }
}

void ReceiverTwin::flush(std::uint64_t begin, std::uint64_t end) {
  if (!session_) {
    // No transmitter listening (bench use); drop the window's batch.
    window_indices_.clear();
    window_basis_.clear();
    return;
  }
  DetectionsPayload p;
  p.slot_begin = begin;
  p.slot_end = end;
  p.indices = std::move(window_indices_);
  p.basis = std::move(window_basis_);
  window_indices_.clear();
  window_basis_.clear();
  std::uint8_t flags = cfg_.include_basis ? kFlagHasBasis : 0;
  session_->request_ok(Opcode::kDetections, encode_detections(p), flags,
                       std::chrono::milliseconds(30'000));
  ++reports_sent_;
}

}  // namespace qkdtwin
