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
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qkdtwin {

// Data plane ---------------------------------------------------------------
//
// One frame per staging block:
//
//   offset  size  field
//        0     4  magic "QKD1" (51 4B 44 31)
//        4     1  stream_id (0 polarization, 1 decoy)
//        5     4  seq, unsigned big endian, strictly increasing per stream
//        9     4  payload length, unsigned big endian
//       13     n  payload
//
// Integers are big endian throughout (network order).

inline constexpr std::array<std::uint8_t, 4> kDataMagic{0x51, 0x4B, 0x44, 0x31};
inline constexpr std::size_t kDataHeaderBytes = 13;

struct DataFrame {
  std::uint8_t stream_id = 0;
  std::uint32_t seq = 0;
  std::vector<std::uint8_t> payload;
  friend bool operator==(const DataFrame&, const DataFrame&) = default;
};

struct DataHeader {
  std::uint8_t stream_id = 0;
  std::uint32_t seq = 0;
  std::uint32_t length = 0;
};

std::array<std::uint8_t, kDataHeaderBytes> encode_data_header(
    std::uint8_t stream_id, std::uint32_t seq, std::uint32_t length);
/// Throws BadMagic on wrong magic.
DataHeader parse_data_header(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_frame(const DataFrame& frame);

/// Incremental data-frame decoder for byte streams arriving in arbitrary
/// pieces. Throws BadMagic / LengthOverflow; never reads past its buffer.
class FrameDecoder {
 public:
  explicit FrameDecoder(std::size_t max_payload);

  void feed(std::span<const std::uint8_t> bytes);
  /// One complete frame, or nothing if more bytes are needed.
  std::optional<DataFrame> next();
  std::size_t buffered() const { return buf_.size(); }

 private:
  std::size_t max_payload_;
  std::vector<std::uint8_t> buf_;
};

// Command plane -------------------------------------------------------------
//
//   offset  size  field
//        0     4  magic "QKC1" (51 4B 43 31)
//        4     1  opcode
//        5     1  flags (DETECTIONS bit 0: basis list present)
//        6     4  request_id, unsigned big endian
//       10     4  payload length, unsigned big endian
//       14     n  payload (JSON object unless stated otherwise)
//
// Every SET_PARAM/START/STOP/STATUS/NEED_BLOCK/DETECTIONS request is
// answered by exactly one ACK or ERROR carrying the same request_id.

inline constexpr std::array<std::uint8_t, 4> kCommandMagic{0x51, 0x4B, 0x43, 0x31};
inline constexpr std::size_t kCommandHeaderBytes = 14;

enum class Opcode : std::uint8_t {
  kSetParam = 1,
  kStart = 2,
  kStop = 3,
  kStatus = 4,
  kNeedBlock = 5,
  kDetections = 6,
  kAck = 7,
  kError = 8,
};

const char* to_string(Opcode op) noexcept;

inline constexpr std::uint8_t kFlagHasBasis = 0x01;

struct CommandFrame {
  Opcode opcode = Opcode::kAck;
  std::uint8_t flags = 0;
  std::uint32_t request_id = 0;
  std::vector<std::uint8_t> payload;
  friend bool operator==(const CommandFrame&, const CommandFrame&) = default;
};

std::vector<std::uint8_t> encode_command(const CommandFrame& frame);

class CommandDecoder {
 public:
  explicit CommandDecoder(std::size_t max_payload = 1 << 24);

  void feed(std::span<const std::uint8_t> bytes);
  std::optional<CommandFrame> next();
  std::size_t buffered() const { return buf_.size(); }

 private:
  std::size_t max_payload_;
  std::vector<std::uint8_t> buf_;
};

// Binary command payloads ----------------------------------------------------

/// NEED_BLOCK: stream_id u8 + block seq u32 big endian (5 bytes).
struct NeedBlockPayload {
  std::uint8_t stream_id = 0;
  std::uint32_t seq = 0;
  friend bool operator==(const NeedBlockPayload&, const NeedBlockPayload&) = default;
};

std::vector<std::uint8_t> encode_need_block(const NeedBlockPayload& p);
NeedBlockPayload parse_need_block(std::span<const std::uint8_t> payload);

/// DETECTIONS: slot_begin u64 BE, slot_end u64 BE, count u32 BE, then
/// count u64 BE slot indices, then (only with kFlagHasBasis) count basis
/// bytes. Deliberately no field for measurement outcomes: the receiver
/// reports which slots clicked, never what it measured.
struct DetectionsPayload {
  std::uint64_t slot_begin = 0;
  std::uint64_t slot_end = 0;
  std::vector<std::uint64_t> indices;
  std::vector<std::uint8_t> basis;  // empty, or one byte per index
  friend bool operator==(const DetectionsPayload&, const DetectionsPayload&) = default;
};

std::vector<std::uint8_t> encode_detections(const DetectionsPayload& p);
DetectionsPayload parse_detections(std::span<const std::uint8_t> payload,
                                   bool has_basis);

// JSON helpers ---------------------------------------------------------------

std::vector<std::uint8_t> json_payload(const std::string& json_text);
std::string payload_text(std::span<const std::uint8_t> payload);

}  // namespace qkdtwin
