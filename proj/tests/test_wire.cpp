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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "qkdtwin/wire.hpp"
#include "test_util.hpp"

using namespace qkdtwin;
using qkdtwin_test::error_code_of;

namespace {

/// Feeds `bytes` to a decoder in random-sized pieces, draining complete
/// frames after each piece.
template <typename Decoder, typename Frame>
std::vector<Frame> decode_in_pieces(Decoder& dec,
                                    std::span<const std::uint8_t> bytes,
                                    std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::uniform_int_distribution<std::size_t> piece(1, 23);
  std::vector<Frame> out;
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min(piece(gen), bytes.size() - off);
    dec.feed(bytes.subspan(off, n));
    off += n;
    while (auto f = dec.next()) out.push_back(std::move(*f));
  }
  return out;
}

}  // namespace

TEST_CASE("the data header encodes to the fixed network layout") {
  const auto h = encode_data_header(0, 1, 0);
  const std::vector<std::uint8_t> want{0x51, 0x4B, 0x44, 0x31, 0x00, 0x00, 0x00,
                                       0x00, 0x01, 0x00, 0x00, 0x00, 0x00};
  CHECK(std::vector<std::uint8_t>(h.begin(), h.end()) == want);

  const auto h2 = encode_data_header(1, 0x01020304u, 0xA1B2C3D4u);
  const std::vector<std::uint8_t> want2{0x51, 0x4B, 0x44, 0x31, 0x01, 0x01, 0x02,
                                        0x03, 0x04, 0xA1, 0xB2, 0xC3, 0xD4};
  CHECK(std::vector<std::uint8_t>(h2.begin(), h2.end()) == want2);

  const DataHeader parsed = parse_data_header(h2);
  CHECK(parsed.stream_id == 1);
  CHECK(parsed.seq == 0x01020304u);
  CHECK(parsed.length == 0xA1B2C3D4u);
}

TEST_CASE("malformed data headers are rejected") {
  auto h = encode_data_header(0, 0, 0);
  h[0] = 'X';
  CHECK(error_code_of([&] { parse_data_header(h); }) == ErrorCode::kBadMagic);
  const std::vector<std::uint8_t> shortbuf(5, 0);
  CHECK(error_code_of([&] { parse_data_header(shortbuf); }) ==
        ErrorCode::kProtocol);
}

TEST_CASE("data frames survive a fragmented stream intact and in order") {
  std::mt19937 gen(31);
  std::uniform_int_distribution<std::size_t> len(0, 200);
  std::vector<DataFrame> sent(10);
  std::vector<std::uint8_t> stream;
  for (std::uint32_t i = 0; i < sent.size(); ++i) {
    sent[i].stream_id = static_cast<std::uint8_t>(i % 2);
    sent[i].seq = i;
    sent[i].payload.resize(len(gen));
    for (auto& b : sent[i].payload) b = static_cast<std::uint8_t>(gen());
    const auto enc = encode_frame(sent[i]);
    stream.insert(stream.end(), enc.begin(), enc.end());
  }

  FrameDecoder dec(4096);
  const auto got = decode_in_pieces<FrameDecoder, DataFrame>(dec, stream, 32);
  CHECK(got == sent);
  CHECK(dec.buffered() == 0);
}

TEST_CASE("a partial data frame stays buffered until completed") {
  DataFrame f;
  f.stream_id = 1;
  f.seq = 9;
  f.payload = {1, 2, 3, 4, 5};
  const auto enc = encode_frame(f);

  FrameDecoder dec(4096);
  dec.feed(std::span(enc).first(kDataHeaderBytes));
  CHECK_FALSE(dec.next().has_value());
  dec.feed(std::span(enc).subspan(kDataHeaderBytes, 3));
  CHECK_FALSE(dec.next().has_value());
  dec.feed(std::span(enc).subspan(kDataHeaderBytes + 3));
  CHECK(dec.next() == f);
}

TEST_CASE("oversized data frames trip the length guard") {
  FrameDecoder dec(100);
  const auto h = encode_data_header(0, 0, 101);
  dec.feed(h);
  CHECK(error_code_of([&] { dec.next(); }) == ErrorCode::kLengthOverflow);
}

TEST_CASE("the command header encodes to the fixed network layout") {
  CommandFrame f;
  f.opcode = Opcode::kStart;
  f.request_id = 7;
  const auto enc = encode_command(f);
  const std::vector<std::uint8_t> want{0x51, 0x4B, 0x43, 0x31, 0x02, 0x00, 0x00,
                                       0x00, 0x00, 0x07, 0x00, 0x00, 0x00, 0x00};
  CHECK(enc == want);
}

TEST_CASE("command frames roundtrip for every opcode") {
  std::vector<CommandFrame> sent;
  for (std::uint8_t op = 1; op <= 8; ++op) {
    CommandFrame f;
    f.opcode = static_cast<Opcode>(op);
    f.flags = op == 6 ? kFlagHasBasis : 0;
    f.request_id = 1000u + op;
    f.payload = json_payload("{\"op\":" + std::to_string(op) + "}");
    sent.push_back(std::move(f));
  }
  std::vector<std::uint8_t> stream;
  for (const auto& f : sent) {
    const auto enc = encode_command(f);
    stream.insert(stream.end(), enc.begin(), enc.end());
  }
  CommandDecoder dec;
  const auto got = decode_in_pieces<CommandDecoder, CommandFrame>(dec, stream, 33);
  CHECK(got == sent);
  CHECK(payload_text(got[0].payload) == "{\"op\":1}");
}

TEST_CASE("the command decoder rejects junk") {
  CommandDecoder dec;
  std::vector<std::uint8_t> bad(kCommandHeaderBytes, 0);
  dec.feed(bad);
  CHECK(error_code_of([&] { dec.next(); }) == ErrorCode::kBadMagic);

  CommandDecoder dec2;
  CommandFrame f;
  auto enc = encode_command(f);
  enc[4] = 0;  // below the opcode range
  dec2.feed(enc);
  CHECK(error_code_of([&] { dec2.next(); }) == ErrorCode::kProtocol);

  CommandDecoder dec3;
  enc = encode_command(f);
  enc[4] = 9;  // above the opcode range
  dec3.feed(enc);
  CHECK(error_code_of([&] { dec3.next(); }) == ErrorCode::kProtocol);

  CommandDecoder dec4(16);
  f.payload.assign(17, 0xEE);
  dec4.feed(encode_command(f));
  CHECK(error_code_of([&] { dec4.next(); }) == ErrorCode::kLengthOverflow);
}

TEST_CASE("block requests are five fixed bytes") {
  NeedBlockPayload p;
  p.stream_id = 1;
  p.seq = 0x00010203u;
  const auto enc = encode_need_block(p);
  CHECK(enc == std::vector<std::uint8_t>{0x01, 0x00, 0x01, 0x02, 0x03});
  CHECK(parse_need_block(enc) == p);
  CHECK(error_code_of([&] {
          parse_need_block(std::vector<std::uint8_t>(4));
        }) == ErrorCode::kProtocol);
}

TEST_CASE("detection reports carry slots and indices, never outcomes") {
  DetectionsPayload p;
  p.slot_begin = 1;
  p.slot_end = 2;
  p.indices = {0x0102030405060708ull};
  const auto enc = encode_detections(p);
  const std::vector<std::uint8_t> want{
      0, 0, 0, 0, 0, 0, 0, 1,              // slot_begin
      0, 0, 0, 0, 0, 0, 0, 2,              // slot_end
      0, 0, 0, 1,                          // count
      0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08};
  CHECK(enc == want);
  // The payload is exactly bookkeeping plus indices; there is no room for
  // measurement outcomes.
  CHECK(enc.size() == 20 + 8 * p.indices.size());
  CHECK(parse_detections(enc, false) == p);
}

TEST_CASE("detection reports roundtrip with and without a basis list") {
  DetectionsPayload p;
  p.slot_begin = 4096;
  p.slot_end = 8192;
  p.indices = {4097, 5000, 8191};

  auto enc = encode_detections(p);
  CHECK(enc.size() == 20 + 8 * 3);
  CHECK(parse_detections(enc, false) == p);
  // Announcing a basis list that is not there must not parse.
  CHECK(error_code_of([&] { parse_detections(enc, true); }) ==
        ErrorCode::kProtocol);

  p.basis = {0, 1, 0};
  enc = encode_detections(p);
  CHECK(enc.size() == 20 + 8 * 3 + 3);
  CHECK(parse_detections(enc, true) == p);
  CHECK(error_code_of([&] { parse_detections(enc, false); }) ==
        ErrorCode::kProtocol);

  p.basis = {0, 1};  // shorter than the index list
  CHECK(error_code_of([&] { encode_detections(p); }) ==
        ErrorCode::kLengthMismatch);

  CHECK(error_code_of([&] {
          parse_detections(std::vector<std::uint8_t>(19), false);
        }) == ErrorCode::kProtocol);
}

TEST_CASE("random mixed traffic roundtrips exactly") {
  std::mt19937 gen(34);
  std::uniform_int_distribution<std::size_t> len(0, 64);
  std::uniform_int_distribution<int> op(1, 8);

  std::vector<DataFrame> data_sent;
  std::vector<CommandFrame> cmd_sent;
  std::vector<std::uint8_t> data_stream;
  std::vector<std::uint8_t> cmd_stream;
  for (int i = 0; i < 50; ++i) {
    DataFrame d;
    d.stream_id = static_cast<std::uint8_t>(gen() % 2);
    d.seq = static_cast<std::uint32_t>(gen());
    d.payload.resize(len(gen));
    for (auto& b : d.payload) b = static_cast<std::uint8_t>(gen());
    const auto de = encode_frame(d);
    data_stream.insert(data_stream.end(), de.begin(), de.end());
    data_sent.push_back(std::move(d));

    CommandFrame c;
    c.opcode = static_cast<Opcode>(op(gen));
    c.flags = static_cast<std::uint8_t>(gen() % 2);
    c.request_id = static_cast<std::uint32_t>(gen());
    c.payload.resize(len(gen));
    for (auto& b : c.payload) b = static_cast<std::uint8_t>(gen());
    const auto e = encode_command(c);
    cmd_stream.insert(cmd_stream.end(), e.begin(), e.end());
    cmd_sent.push_back(std::move(c));
  }

  FrameDecoder fdec(1024);
  CommandDecoder cdec;
  CHECK(decode_in_pieces<FrameDecoder, DataFrame>(fdec, data_stream, 35) ==
        data_sent);
  CHECK(decode_in_pieces<CommandDecoder, CommandFrame>(cdec, cmd_stream, 36) ==
        cmd_sent);
}
