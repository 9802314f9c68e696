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

#include "qkdtwin/wire.hpp"

#include <algorithm>
#include <cstring>

#include "qkdtwin/errors.hpp"

namespace qkdtwin {

namespace {

inline void put_u32be(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 24);
  p[1] = static_cast<std::uint8_t>(v >> 16);
  p[2] = static_cast<std::uint8_t>(v >> 8);
  p[3] = static_cast<std::uint8_t>(v);
}

inline std::uint32_t get_u32be(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) << 24 |
         static_cast<std::uint32_t>(p[1]) << 16 |
         static_cast<std::uint32_t>(p[2]) << 8 | static_cast<std::uint32_t>(p[3]);
}

inline void put_u64be(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    p[i] = static_cast<std::uint8_t>(v >> (8 * (7 - i)));
  }
}

inline std::uint64_t get_u64be(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = v << 8 | p[i];
  return v;
}

void erase_front(std::vector<std::uint8_t>& buf, std::size_t n) {
  buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n));
}

}  // namespace

std::array<std::uint8_t, kDataHeaderBytes> encode_data_header(
    std::uint8_t stream_id, std::uint32_t seq, std::uint32_t length) {
  std::array<std::uint8_t, kDataHeaderBytes> h{};
  std::copy(kDataMagic.begin(), kDataMagic.end(), h.begin());
  h[4] = stream_id;
  put_u32be(h.data() + 5, seq);
  put_u32be(h.data() + 9, length);
  return h;
}

DataHeader parse_data_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kDataHeaderBytes) {
    raise(ErrorCode::kProtocol, "short data header");
  }
  if (!std::equal(kDataMagic.begin(), kDataMagic.end(), bytes.begin())) {
    raise(ErrorCode::kBadMagic, "data frame magic mismatch");
  }
  DataHeader h;
  h.stream_id = bytes[4];
  h.seq = get_u32be(bytes.data() + 5);
  h.length = get_u32be(bytes.data() + 9);
  return h;
}

std::vector<std::uint8_t> encode_frame(const DataFrame& frame) {
  const auto header = encode_data_header(
      frame.stream_id, frame.seq, static_cast<std::uint32_t>(frame.payload.size()));
  std::vector<std::uint8_t> out;
  out.reserve(kDataHeaderBytes + frame.payload.size());
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

FrameDecoder::FrameDecoder(std::size_t max_payload) : max_payload_(max_payload) {}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<DataFrame> FrameDecoder::next() {
  if (buf_.size() < kDataHeaderBytes) return std::nullopt;
  const DataHeader h = parse_data_header(buf_);
  if (h.length > max_payload_) {
    raise(ErrorCode::kLengthOverflow,
          "frame length " + std::to_string(h.length) + " exceeds limit " +
              std::to_string(max_payload_));
  }
  if (buf_.size() < kDataHeaderBytes + h.length) return std::nullopt;
  DataFrame frame;
  frame.stream_id = h.stream_id;
  frame.seq = h.seq;
  frame.payload.assign(buf_.begin() + kDataHeaderBytes,
                       buf_.begin() + static_cast<std::ptrdiff_t>(
                                          kDataHeaderBytes + h.length));
  erase_front(buf_, kDataHeaderBytes + h.length);
  return frame;
}

const char* to_string(Opcode op) noexcept {
  switch (op) {
    case Opcode::kSetParam: return "SET_PARAM";
    case Opcode::kStart: return "START";
    case Opcode::kStop: return "STOP";
    case Opcode::kStatus: return "STATUS";
    case Opcode::kNeedBlock: return "NEED_BLOCK";
    case Opcode::kDetections: return "DETECTIONS";
    case Opcode::kAck: return "ACK";
    case Opcode::kError: return "ERROR";
  }
  return "?";
}

std::vector<std::uint8_t> encode_command(const CommandFrame& frame) {
  std::vector<std::uint8_t> out(kCommandHeaderBytes + frame.payload.size());
  std::copy(kCommandMagic.begin(), kCommandMagic.end(), out.begin());
  out[4] = static_cast<std::uint8_t>(frame.opcode);
  out[5] = frame.flags;
  put_u32be(out.data() + 6, frame.request_id);
  put_u32be(out.data() + 10, static_cast<std::uint32_t>(frame.payload.size()));
  std::copy(frame.payload.begin(), frame.payload.end(),
            out.begin() + kCommandHeaderBytes);
  return out;
}

CommandDecoder::CommandDecoder(std::size_t max_payload)
    : max_payload_(max_payload) {}

void CommandDecoder::feed(std::span<const std::uint8_t> bytes) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<CommandFrame> CommandDecoder::next() {
  if (buf_.size() < kCommandHeaderBytes) return std::nullopt;
  if (!std::equal(kCommandMagic.begin(), kCommandMagic.end(), buf_.begin())) {
    raise(ErrorCode::kBadMagic, "command frame magic mismatch");
  }
  const std::uint8_t op = buf_[4];
  if (op < static_cast<std::uint8_t>(Opcode::kSetParam) ||
      op > static_cast<std::uint8_t>(Opcode::kError)) {
    raise(ErrorCode::kProtocol, "unknown opcode " + std::to_string(op));
  }
  const std::uint32_t length = get_u32be(buf_.data() + 10);
  if (length > max_payload_) {
    raise(ErrorCode::kLengthOverflow,
          "command length " + std::to_string(length) + " exceeds limit " +
              std::to_string(max_payload_));
  }
  if (buf_.size() < kCommandHeaderBytes + length) return std::nullopt;
  CommandFrame frame;
  frame.opcode = static_cast<Opcode>(op);
  frame.flags = buf_[5];
  frame.request_id = get_u32be(buf_.data() + 6);
  frame.payload.assign(buf_.begin() + kCommandHeaderBytes,
                       buf_.begin() + static_cast<std::ptrdiff_t>(
                                          kCommandHeaderBytes + length));
  erase_front(buf_, kCommandHeaderBytes + length);
  return frame;
}

std::vector<std::uint8_t> encode_need_block(const NeedBlockPayload& p) {
  std::vector<std::uint8_t> out(5);
  out[0] = p.stream_id;
  put_u32be(out.data() + 1, p.seq);
  return out;
}

NeedBlockPayload parse_need_block(std::span<const std::uint8_t> payload) {
  if (payload.size() != 5) {
    raise(ErrorCode::kProtocol, "NEED_BLOCK payload must be 5 bytes");
  }
  NeedBlockPayload p;
  p.stream_id = payload[0];
  p.seq = get_u32be(payload.data() + 1);
  return p;
}

std::vector<std::uint8_t> encode_detections(const DetectionsPayload& p) {
  if (!p.basis.empty() && p.basis.size() != p.indices.size()) {
    raise(ErrorCode::kLengthMismatch, "basis list must match index list");
  }
  std::vector<std::uint8_t> out(20 + 8 * p.indices.size() + p.basis.size());
  put_u64be(out.data(), p.slot_begin);
  put_u64be(out.data() + 8, p.slot_end);
  put_u32be(out.data() + 16, static_cast<std::uint32_t>(p.indices.size()));
  for (std::size_t i = 0; i < p.indices.size(); ++i) {
    put_u64be(out.data() + 20 + 8 * i, p.indices[i]);
  }
  std::copy(p.basis.begin(), p.basis.end(),
            out.begin() + static_cast<std::ptrdiff_t>(20 + 8 * p.indices.size()));
  return out;
}

DetectionsPayload parse_detections(std::span<const std::uint8_t> payload,
                                   bool has_basis) {
  if (payload.size() < 20) {
    raise(ErrorCode::kProtocol, "DETECTIONS payload too short");
  }
  DetectionsPayload p;
  p.slot_begin = get_u64be(payload.data());
  p.slot_end = get_u64be(payload.data() + 8);
  const std::uint32_t count = get_u32be(payload.data() + 16);
  const std::size_t want = 20 + 8ull * count + (has_basis ? count : 0);
  if (payload.size() != want) {
    raise(ErrorCode::kProtocol,
          "DETECTIONS payload is " + std::to_string(payload.size()) +
              " bytes, want " + std::to_string(want));
  }
  p.indices.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    p.indices[i] = get_u64be(payload.data() + 20 + 8ull * i);
  }
  if (has_basis) {
    p.basis.assign(payload.begin() + static_cast<std::ptrdiff_t>(20 + 8ull * count),
                   payload.end());
  }
  return p;
}

std::vector<std::uint8_t> json_payload(const std::string& json_text) {
  return std::vector<std::uint8_t>(json_text.begin(), json_text.end());
}

std::string payload_text(std::span<const std::uint8_t> payload) {
  return std::string(payload.begin(), payload.end());
}

}  // namespace qkdtwin
