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
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "qkdtwin/channel_model.hpp"
#include "qkdtwin/encoding.hpp"
#include "qkdtwin/receiver_twin.hpp"
#include "qkdtwin/retention.hpp"
#include "test_util.hpp"

using namespace qkdtwin;
using qkdtwin_test::error_code_of;

namespace {

/// Counts within 4 standard deviations of a binomial(n, p) mean.
void check_binomial(std::uint64_t count, std::uint64_t n, double p) {
  const double mean = static_cast<double>(n) * p;
  const double sigma = std::sqrt(static_cast<double>(n) * p * (1.0 - p));
  const double dev = std::abs(static_cast<double>(count) - mean);
  INFO("count " << count << " of " << n << ", expected " << mean << " +- "
                << 4.0 * sigma);
  CHECK(dev <= 4.0 * sigma + 1.0);
}

/// Random code planes over n slots: pol uniform on {0,1,2}, decoy uniform
/// on {HIGH, LOW, VACUUM}.
struct Planted {
  std::vector<std::uint8_t> pol;
  std::vector<std::uint8_t> decoy;
};

Planted plant_codes(std::size_t n, std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::uniform_int_distribution<int> code(0, 2);
  Planted p;
  p.pol.resize(n);
  p.decoy.resize(n);
  for (auto& c : p.pol) c = static_cast<std::uint8_t>(code(gen));
  for (auto& c : p.decoy) c = static_cast<std::uint8_t>(code(gen));
  return p;
}

std::vector<PulseFrame> frames_of(const Planted& p) {
  const ClockConfig clock;
  const ChannelOffsets offsets;
  return frame_stream(pack_symbols(p.pol), pack_symbols(p.decoy), clock,
                      offsets, p.pol.size());
}

}  // namespace

TEST_CASE("a transparent channel clicks on every pulse and never on vacuum") {
  ChannelModel ch(ChannelConfig{1.0, 1.0, 0.0, 5});
  for (int i = 0; i < 1000; ++i) {
    CHECK(ch.detect(false));
    CHECK_FALSE(ch.detect(true));
  }
  ChannelModel blocked(ChannelConfig{0.0, 1.0, 0.0, 5});
  for (int i = 0; i < 1000; ++i) CHECK_FALSE(blocked.detect(false));
}

TEST_CASE("click rates follow the configured loss and dark counts") {
  const std::uint64_t n = 100'000;

  ChannelModel lossy(ChannelConfig{0.25, 0.8, 0.0, 6});
  std::uint64_t clicks = 0;
  for (std::uint64_t i = 0; i < n; ++i) clicks += lossy.detect(false);
  check_binomial(clicks, n, 0.2);

  ChannelModel dark(ChannelConfig{1.0, 1.0, 0.01, 7});
  std::uint64_t dark_clicks = 0;
  for (std::uint64_t i = 0; i < n; ++i) dark_clicks += dark.detect(true);
  check_binomial(dark_clicks, n, 0.01);

  // Signal and dark-count paths combine as independent chances.
  ChannelModel both(ChannelConfig{0.5, 1.0, 0.5, 8});
  std::uint64_t both_clicks = 0;
  for (std::uint64_t i = 0; i < n; ++i) both_clicks += both.detect(false);
  check_binomial(both_clicks, n, 0.75);

  CHECK(error_code_of([] {
          ChannelModel bad(ChannelConfig{1.5, 1.0, 0.0, 1});
        }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("detections replay identically whatever the batching") {
  const auto planted = plant_codes(4096, 51);
  const auto frames = frames_of(planted);

  ChannelModel one(ChannelConfig{0.3, 0.9, 0.001, 52});
  std::vector<std::uint64_t> whole = transmit_through(frames, one);

  ChannelModel two(ChannelConfig{0.3, 0.9, 0.001, 52});
  std::vector<std::uint64_t> pieces;
  std::mt19937 gen(53);
  std::uniform_int_distribution<std::size_t> piece(1, 500);
  std::size_t off = 0;
  while (off < frames.size()) {
    const std::size_t len = std::min(piece(gen), frames.size() - off);
    const auto part =
        transmit_through(std::span(frames).subspan(off, len), two);
    pieces.insert(pieces.end(), part.begin(), part.end());
    off += len;
  }
  CHECK_FALSE(whole.empty());
  CHECK(whole == pieces);
}

TEST_CASE("a matched basis reads back the transmitted state") {
  MeasurementModel z_only(MeasurementConfig{1.0, 0.0, 61});
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto r0 = z_only.measure(2 * s, 0);
    CHECK(r0.basis == static_cast<std::uint8_t>(Basis::kZ));
    CHECK(r0.outcome == 0);
    const auto r1 = z_only.measure(2 * s + 1, 1);
    CHECK(r1.outcome == 1);
    CHECK(r1.slot == 2 * s + 1);
  }

  MeasurementModel x_only(MeasurementConfig{0.0, 0.0, 62});
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto r = x_only.measure(s, 2);
    CHECK(r.basis == static_cast<std::uint8_t>(Basis::kX));
    CHECK(r.outcome == 0);
  }

  CHECK(error_code_of([&] { z_only.measure(0, 3); }) ==
        ErrorCode::kInvalidSymbol);
  CHECK(error_code_of([] {
          MeasurementModel bad(MeasurementConfig{-0.1, 0.0, 1});
        }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("a mismatched basis is a fair coin") {
  MeasurementModel z_only(MeasurementConfig{1.0, 0.0, 63});
  const std::uint64_t n = 10'000;
  std::uint64_t ones = 0;
  for (std::uint64_t s = 0; s < n; ++s) {
    ones += z_only.measure(s, 2).outcome;  // check state seen in key basis
  }
  check_binomial(ones, n, 0.5);
}

TEST_CASE("flip noise corrupts outcomes at the configured rate") {
  MeasurementModel noisy(MeasurementConfig{1.0, 0.1, 64});
  const std::uint64_t n = 100'000;
  std::uint64_t flipped = 0;
  for (std::uint64_t s = 0; s < n; ++s) {
    flipped += noisy.measure(s, 0).outcome;  // any 1 must be a flip
  }
  check_binomial(flipped, n, 0.1);
}

TEST_CASE("measurements replay independently of what was measured") {
  // Same seed, same number of calls; what happened at slot 1 differs. The
  // fixed per-call draw count keeps every later record identical.
  MeasurementModel a(MeasurementConfig{0.5, 0.05, 65});
  MeasurementModel b(MeasurementConfig{0.5, 0.05, 65});

  a.measure(0, 1);
  b.measure(0, 1);
  a.measure(1, 2);
  b.measure_dark(1);
  for (std::uint64_t s = 2; s < 200; ++s) {
    CHECK(a.measure(s, s % 3) == b.measure(s, s % 3));
  }
}

TEST_CASE("sift statistics join the two ledgers exactly") {
  const auto high = static_cast<std::uint8_t>(Intensity::kHigh);
  const auto low = static_cast<std::uint8_t>(Intensity::kLow);
  const auto vac = static_cast<std::uint8_t>(Intensity::kVacuum);
  const auto bz = static_cast<std::uint8_t>(Basis::kZ);
  const auto bx = static_cast<std::uint8_t>(Basis::kX);

  const std::vector<SiftedPair> sent{
      {0, 0, high},  // matched Z, correct
      {1, 1, low},   // matched Z, wrong outcome
      {2, 2, high},  // matched X, correct
      {3, 0, vac},   // dark click on an empty slot: excluded entirely
      {4, 0, high},  // basis mismatch: sifted but not compared
  };
  const std::vector<MeasurementRecord> seen{
      {0, bz, 0}, {1, bz, 0}, {2, bx, 0}, {3, bz, 1}, {4, bx, 1},
  };

  const SiftStats st = compute_stats(sent, seen);
  CHECK(st.sifted == 4);
  CHECK(st.matched == 3);
  CHECK(st.errors == 1);
  REQUIRE(st.qber.has_value());
  CHECK(*st.qber == doctest::Approx(1.0 / 3.0));

  const SiftStats empty = compute_stats({}, {});
  CHECK(empty.sifted == 0);
  CHECK_FALSE(empty.qber.has_value());

  CHECK(error_code_of([&] {
          compute_stats(sent, std::span(seen).first(4));
        }) == ErrorCode::kIndexMismatch);
  auto wrong = seen;
  wrong[2].slot = 99;
  CHECK(error_code_of([&] { compute_stats(sent, wrong); }) ==
        ErrorCode::kIndexMismatch);
}

TEST_CASE("a noiseless lossy link sifts with zero error rate") {
  const std::size_t n = 200'000;
  const auto planted = plant_codes(n, 71);
  const auto frames = frames_of(planted);

  ChannelModel ch(ChannelConfig{0.1, 1.0, 0.0, 72});
  const auto detected = transmit_through(frames, ch);
  REQUIRE_FALSE(detected.empty());

  std::vector<SiftedPair> sent;
  for (std::uint64_t slot : detected) {
    sent.push_back(SiftedPair{slot, planted.pol[slot], planted.decoy[slot]});
    // Vacuum slots cannot click without dark counts.
    CHECK(planted.decoy[slot] != static_cast<std::uint8_t>(Intensity::kVacuum));
  }

  MeasurementModel meas(MeasurementConfig{0.5, 0.0, 73});
  std::vector<MeasurementRecord> records;
  for (std::uint64_t slot : detected) {
    records.push_back(meas.measure(slot, planted.pol[slot]));
  }

  const SiftStats st = compute_stats(sent, records);
  CHECK(st.sifted == detected.size());
  check_binomial(st.matched, st.sifted, 0.5);
  CHECK(st.errors == 0);
  REQUIRE(st.qber.has_value());
  CHECK(*st.qber == 0.0);
}

TEST_CASE("flip noise shows up as the expected error rate after sifting") {
  const std::size_t n = 200'000;
  const auto planted = plant_codes(n, 74);
  const auto frames = frames_of(planted);

  ChannelModel ch(ChannelConfig{0.1, 1.0, 0.0, 75});
  const auto detected = transmit_through(frames, ch);

  std::vector<SiftedPair> sent;
  MeasurementModel meas(MeasurementConfig{0.5, 0.01, 76});
  std::vector<MeasurementRecord> records;
  for (std::uint64_t slot : detected) {
    sent.push_back(SiftedPair{slot, planted.pol[slot], planted.decoy[slot]});
    records.push_back(meas.measure(slot, planted.pol[slot]));
  }

  const SiftStats st = compute_stats(sent, records);
  REQUIRE(st.matched > 1000);
  check_binomial(st.errors, st.matched, 0.01);
}

TEST_CASE("the receiver twin measures frames offline when unconnected") {
  ReceiverConfig cfg;
  cfg.channel = ChannelConfig{1.0, 1.0, 0.0, 81};
  cfg.measurement = MeasurementConfig{1.0, 0.0, 82};
  cfg.report_interval_slots = 64;
  const ClockConfig clock;
  const ChannelOffsets offsets;

  ReceiverTwin rx(cfg);
  std::uint64_t expected_clicks = 0;
  for (std::uint64_t slot = 0; slot < 256; ++slot) {
    const std::uint8_t pol = slot % 2;
    const std::uint8_t decoy = slot % 3 == 0 ? 2 : 0;  // every third is vacuum
    rx.on_frame(encode_codes(pol, decoy, slot, clock, offsets));
    if (slot % 3 != 0) ++expected_clicks;
  }
  rx.finish(256);

  CHECK(rx.detections() == expected_clicks);
  CHECK(rx.reports_sent() == 0);  // nothing to report to
  for (const auto& rec : rx.records()) {
    CHECK(rec.outcome == rec.slot % 2);  // key basis reads the sent bit
    CHECK(rec.slot % 3 != 0);
  }
}

TEST_CASE("the receiver inverts a remapped position table") {
  ReceiverConfig cfg;
  cfg.channel = ChannelConfig{1.0, 1.0, 0.0, 83};
  cfg.measurement = MeasurementConfig{1.0, 0.0, 84};
  cfg.report_interval_slots = 64;
  cfg.maps.pol_position = {2, 0, 1};
  const ClockConfig clock;
  const ChannelOffsets offsets;

  ReceiverTwin rx(cfg);
  for (std::uint64_t slot = 0; slot < 32; ++slot) {
    const std::uint8_t pol = slot % 2;
    rx.on_frame(encode_codes(pol, 0, slot, clock, offsets, cfg.maps));
  }
  rx.finish(32);
  REQUIRE(rx.records().size() == 32);
  for (const auto& rec : rx.records()) {
    CHECK(rec.outcome == rec.slot % 2);
  }

  ReceiverConfig bad = cfg;
  bad.report_interval_slots = 0;
  CHECK(error_code_of([&] { ReceiverTwin r(bad); }) ==
        ErrorCode::kInvalidConfig);
}
