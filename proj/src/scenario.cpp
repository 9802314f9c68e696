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

#include "qkdtwin/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "qkdtwin/board_twin.hpp"
#include "qkdtwin/errors.hpp"
#include "qkdtwin/receiver_twin.hpp"
#include "qkdtwin/retention.hpp"
#include "qkdtwin/source_twin.hpp"
#include "qkdtwin/spd_sampler.hpp"
#include "qkdtwin/util.hpp"

namespace qkdtwin {

// Names and parsing -----------------------------------------------------------

const char* to_string(ScenarioMode m) noexcept {
  switch (m) {
    case ScenarioMode::kTxLoopback:
      return "tx_loopback";
    case ScenarioMode::kTxRxFull:
      return "tx_rx_full";
    case ScenarioMode::kQrngBottomUp:
      return "qrng_bottom_up";
    case ScenarioMode::kSoak:
      return "soak";
  }
  return "?";
}

const char* to_string(TimeModel t) noexcept {
  return t == TimeModel::kAsFastAsPossible ? "afap" : "real_time";
}

ScenarioMode parse_mode(const std::string& text) {
  if (text == "tx_loopback") return ScenarioMode::kTxLoopback;
  if (text == "tx_rx_full") return ScenarioMode::kTxRxFull;
  if (text == "qrng_bottom_up") return ScenarioMode::kQrngBottomUp;
  if (text == "soak") return ScenarioMode::kSoak;
  raise(ErrorCode::kInvalidConfig, "unknown mode: " + text);
}

TimeModel parse_time_model(const std::string& text) {
  if (text == "afap" || text == "as_fast_as_possible") {
    return TimeModel::kAsFastAsPossible;
  }
  if (text == "real_time" || text == "throttled") {
    return TimeModel::kRealTimeThrottled;
  }
  raise(ErrorCode::kInvalidConfig, "unknown time model: " + text);
}

namespace {

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    std::uint64_t out = std::stoull(v, &used, 0);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    raise(ErrorCode::kInvalidConfig, key + ": expected an integer, got " + v);
  }
}

double parse_f64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    raise(ErrorCode::kInvalidConfig, key + ": expected a number, got " + v);
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  raise(ErrorCode::kInvalidConfig, key + ": expected a boolean, got " + v);
}

std::array<double, 3> parse_probs(const std::string& key,
                                  const std::string& v) {
  std::array<double, 3> out{};
  std::stringstream ss(v);
  std::string item;
  for (int i = 0; i < 3; ++i) {
    if (!std::getline(ss, item, ',')) {
      raise(ErrorCode::kInvalidConfig, key + ": expected three probabilities");
    }
    out[i] = parse_f64(key, item);
  }
  if (std::getline(ss, item, ',')) {
    raise(ErrorCode::kInvalidConfig, key + ": expected three probabilities");
  }
  return out;
}

std::uint16_t parse_port(const std::string& key, const std::string& v) {
  std::uint64_t p = parse_u64(key, v);
  if (p > 65535) raise(ErrorCode::kInvalidConfig, key + ": port out of range");
  return static_cast<std::uint16_t>(p);
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void apply_key_value(ScenarioConfig& cfg, const std::string& key,
                     const std::string& value) {
  if (key == "mode") {
    cfg.mode = parse_mode(value);
  } else if (key == "time_model") {
    cfg.time_model = parse_time_model(value);
  } else if (key == "duration_s") {
    cfg.duration_s = parse_f64(key, value);
  } else if (key == "n_slots") {
    cfg.n_slots = parse_u64(key, value);
  } else if (key == "master_seed") {
    cfg.master_seed = parse_u64(key, value);
  } else if (key == "out_dir") {
    cfg.out_dir = value;
  } else if (key == "bind_addr") {
    cfg.bind_addr = value;
  } else if (key == "command_port") {
    cfg.command_port = parse_port(key, value);
  } else if (key == "pol_port") {
    cfg.pol_port = parse_port(key, value);
  } else if (key == "decoy_port") {
    cfg.decoy_port = parse_port(key, value);
  } else if (key == "detections_port") {
    cfg.detections_port = parse_port(key, value);
  } else if (key == "clock_hz") {
    cfg.clock.clock_hz = parse_u64(key, value);
  } else if (key == "slot_ticks") {
    cfg.clock.slot_ticks = static_cast<std::uint32_t>(parse_u64(key, value));
  } else if (key == "laser_offset") {
    cfg.offsets.laser = static_cast<std::uint32_t>(parse_u64(key, value));
  } else if (key == "pol_offset") {
    cfg.offsets.pol = static_cast<std::uint32_t>(parse_u64(key, value));
  } else if (key == "intensity_offset") {
    cfg.offsets.intensity = static_cast<std::uint32_t>(parse_u64(key, value));
  } else if (key == "block_bytes") {
    cfg.ring.block_bytes = parse_u64(key, value);
  } else if (key == "ring_blocks") {
    cfg.ring.n_blocks = parse_u64(key, value);
  } else if (key == "chunk_bytes") {
    cfg.ring.chunk_bytes = parse_u64(key, value);
  } else if (key == "bram_words") {
    cfg.bram_words = parse_u64(key, value);
  } else if (key == "p_pol") {
    cfg.bias.p_pol = parse_probs(key, value);
  } else if (key == "p_decoy") {
    cfg.bias.p_decoy = parse_probs(key, value);
  } else if (key == "resolution_bits") {
    cfg.bias.resolution_bits =
        static_cast<unsigned>(parse_u64(key, value));
  } else if (key == "retention_chunks") {
    cfg.retention_chunks = parse_u64(key, value);
  } else if (key == "source") {
    if (value == "csprng") {
      cfg.source_kind = SourceKind::kCsprng;
    } else if (value == "qrng") {
      cfg.source_kind = SourceKind::kQrngEmulated;
    } else {
      raise(ErrorCode::kInvalidConfig, "source: csprng or qrng, got " + value);
    }
  } else if (key == "qrng_bits_per_second") {
    cfg.qrng_bits_per_second = parse_f64(key, value);
  } else if (key == "transmittance") {
    cfg.channel.transmittance = parse_f64(key, value);
  } else if (key == "efficiency") {
    cfg.channel.efficiency = parse_f64(key, value);
  } else if (key == "dark_count_prob") {
    cfg.channel.dark_count_prob = parse_f64(key, value);
  } else if (key == "basis_z_prob") {
    cfg.measurement.basis_z_prob = parse_f64(key, value);
  } else if (key == "flip_prob") {
    cfg.measurement.flip_prob = parse_f64(key, value);
  } else if (key == "report_interval_slots") {
    cfg.report_interval_slots = parse_u64(key, value);
  } else if (key == "include_basis") {
    cfg.include_basis = parse_bool(key, value);
  } else if (key == "qber_threshold") {
    cfg.qber_threshold = parse_f64(key, value);
  } else if (key == "stall_at_s") {
    cfg.stall_at_s = parse_f64(key, value);
  } else if (key == "stall_seconds") {
    cfg.stall_seconds = parse_f64(key, value);
  } else if (key == "auth_token") {
    cfg.auth_token = value;
  } else if (key == "qrng_edge_rate_hz") {
    cfg.qrng_edge_rate_hz = parse_f64(key, value);
  } else if (key == "qrng_bits") {
    cfg.qrng_bits = parse_u64(key, value);
  } else if (key == "qrng_window_ticks") {
    cfg.qrng_window_ticks = static_cast<std::uint32_t>(parse_u64(key, value));
  } else if (key == "preload_timeout_s") {
    cfg.preload_timeout_s = parse_f64(key, value);
  } else if (key == "run_timeout_s") {
    cfg.run_timeout_s = parse_f64(key, value);
  } else {
    raise(ErrorCode::kInvalidConfig, "unknown config key: " + key);
  }
}

ScenarioConfig parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::kIo, "cannot open config file " + path);
  ScenarioConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) {
      raise(ErrorCode::kInvalidConfig,
            path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    apply_key_value(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

void apply_env_overrides(ScenarioConfig& cfg) {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  if (auto v = env("QKDTWIN_BIND_ADDR")) cfg.bind_addr = *v;
  if (auto v = env("QKDTWIN_COMMAND_PORT"))
    cfg.command_port = parse_port("QKDTWIN_COMMAND_PORT", *v);
  if (auto v = env("QKDTWIN_POL_PORT"))
    cfg.pol_port = parse_port("QKDTWIN_POL_PORT", *v);
  if (auto v = env("QKDTWIN_DECOY_PORT"))
    cfg.decoy_port = parse_port("QKDTWIN_DECOY_PORT", *v);
  if (auto v = env("QKDTWIN_DETECTIONS_PORT"))
    cfg.detections_port = parse_port("QKDTWIN_DETECTIONS_PORT", *v);
}

void ScenarioConfig::validate() const {
  if (n_slots == 0 && duration_s <= 0.0) {
    raise(ErrorCode::kInvalidConfig, "run length is zero");
  }
  clock.validate();
  offsets.validate(clock);
  ring.validate();
  bias.validate();
  channel.validate();
  measurement.validate();
  if (report_interval_slots == 0) {
    raise(ErrorCode::kInvalidConfig, "report_interval_slots must be positive");
  }
  if (qber_threshold < 0.0 || qber_threshold > 1.0) {
    raise(ErrorCode::kInvalidConfig, "qber_threshold must be within [0,1]");
  }
  if (mode == ScenarioMode::kQrngBottomUp) {
    if (qrng_edge_rate_hz <= 0.0 || qrng_bits == 0 || qrng_window_ticks == 0) {
      raise(ErrorCode::kInvalidConfig, "photon harvest parameters must be positive");
    }
  }
}

// Status plumbing --------------------------------------------------------------

namespace {

struct StatusView {
  std::string state;
  std::string error;
  double elapsed_s = 0.0;
  std::uint64_t slots = 0;
  std::uint64_t vacuum_slots = 0;
  std::uint64_t rx_bytes[2] = {0, 0};
  std::uint64_t rx_blocks[2] = {0, 0};
  std::uint64_t rx_hash[2] = {0, 0};
  std::uint64_t consumed_words[2] = {0, 0};
  std::uint64_t consumed_hash[2] = {0, 0};
  std::uint64_t occupancy[2] = {0, 0};
  std::uint64_t underruns = 0;
  std::uint64_t sequence_gaps = 0;
};

std::uint64_t hex_to_u64(const std::string& s) {
  return std::stoull(s, nullptr, 16);
}

StatusView parse_status(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  StatusView v;
  v.state = j.at("state").get<std::string>();
  if (j.contains("error")) v.error = j["error"].get<std::string>();
  v.elapsed_s = j.at("elapsed_s").get<double>();
  v.slots = j.at("slots").get<std::uint64_t>();
  v.vacuum_slots = j.at("vacuum_slots").get<std::uint64_t>();
  v.rx_bytes[0] = j.at("rx_bytes_pol").get<std::uint64_t>();
  v.rx_bytes[1] = j.at("rx_bytes_decoy").get<std::uint64_t>();
  v.rx_blocks[0] = j.at("rx_blocks_pol").get<std::uint64_t>();
  v.rx_blocks[1] = j.at("rx_blocks_decoy").get<std::uint64_t>();
  v.rx_hash[0] = hex_to_u64(j.at("rx_hash_pol").get<std::string>());
  v.rx_hash[1] = hex_to_u64(j.at("rx_hash_decoy").get<std::string>());
  v.consumed_words[0] = j.at("consumed_words_pol").get<std::uint64_t>();
  v.consumed_words[1] = j.at("consumed_words_decoy").get<std::uint64_t>();
  v.consumed_hash[0] = hex_to_u64(j.at("consumed_hash_pol").get<std::string>());
  v.consumed_hash[1] =
      hex_to_u64(j.at("consumed_hash_decoy").get<std::string>());
  v.occupancy[0] = j.at("occupancy_pol").get<std::uint64_t>();
  v.occupancy[1] = j.at("occupancy_decoy").get<std::uint64_t>();
  v.underruns = j.at("underruns").get<std::uint64_t>();
  v.sequence_gaps = j.at("sequence_gaps").get<std::uint64_t>();
  return v;
}

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) {
  return (a + b - 1) / b;
}

// The transmitter family: loopback, the full receiver round trip, and the
// soak arrangement (a paced loopback).
ScenarioResult run_transmitter(const ScenarioConfig& cfg) {
  ScenarioResult res;
  const bool real_time = cfg.time_model == TimeModel::kRealTimeThrottled;
  const bool with_rx = cfg.mode == ScenarioMode::kTxRxFull;
  const double rep_hz = cfg.clock.repetition_hz();
  const std::uint64_t n_slots =
      cfg.n_slots != 0
          ? cfg.n_slots
          : static_cast<std::uint64_t>(std::llround(cfg.duration_s * rep_hz));
  if (n_slots == 0) raise(ErrorCode::kInvalidConfig, "run length is zero");

  std::uint64_t seed_state = cfg.master_seed;
  const std::uint64_t source_seed = splitmix64(seed_state);
  const std::uint64_t channel_seed = splitmix64(seed_state);
  const std::uint64_t measure_seed = splitmix64(seed_state);

  // One retained chunk is exactly one staging block, so block requests
  // index straight into the retention store.
  const std::uint64_t symbols_per_block = cfg.ring.block_bytes * 4;
  // The board asks one block ahead per consumed block, keeping its ring
  // full until the end, and prefetches a little past the last consumed
  // word. Cover the whole request window so the tail of a paced run is
  // fed at the same rate as the middle.
  const std::uint64_t blocks_needed =
      ceil_div(n_slots, symbols_per_block) + cfg.ring.n_blocks + 1;

  std::unique_ptr<ReceiverTwin> receiver;
  if (with_rx) {
    ReceiverConfig rc;
    rc.channel = cfg.channel;
    rc.channel.seed = channel_seed;
    rc.measurement = cfg.measurement;
    rc.measurement.seed = measure_seed;
    rc.report_interval_slots = cfg.report_interval_slots;
    rc.include_basis = cfg.include_basis;
    rc.board_addr = cfg.bind_addr;
    rc.auth_token = cfg.auth_token;
    receiver = std::make_unique<ReceiverTwin>(rc);
  }

  BoardConfig bc;
  bc.bind_addr = cfg.bind_addr;
  bc.command_port = cfg.command_port;
  bc.pol_port = cfg.pol_port;
  bc.decoy_port = cfg.decoy_port;
  bc.detections_port = cfg.detections_port;
  bc.clock = cfg.clock;
  bc.offsets = cfg.offsets;
  bc.ring = cfg.ring;
  bc.bram_words = cfg.bram_words;
  bc.real_time = real_time;
  bc.max_slots = n_slots;
  bc.auth_token = cfg.auth_token;
  BoardTwin board(bc, receiver.get());

  SourceConfig sc;
  sc.board_addr = cfg.bind_addr;
  sc.command_port = board.command_port();
  sc.pol_port = board.pol_port();
  sc.decoy_port = board.decoy_port();
  sc.kind = cfg.source_kind;
  sc.qrng_bits_per_second = cfg.qrng_bits_per_second;
  sc.seed = Seed256::from_u64(source_seed);
  sc.bias = cfg.bias;
  sc.retention.chunk_bytes = cfg.ring.block_bytes;
  if (cfg.retention_chunks != 0) sc.retention.n_chunks = cfg.retention_chunks;
  sc.retention.retain_for_sifting = with_rx;
  sc.produce_blocks = blocks_needed;
  sc.stall_at_s = cfg.stall_at_s;
  sc.stall_seconds = cfg.stall_seconds;
  sc.auth_token = cfg.auth_token;
  SourceTwin source(sc);
  source.connect();

  auto fail = [&](const std::string& why) {
    res.failure = why;
    res.exit_code = 1;
  };

  // Prefill: emission starts from completely full staging rings.
  const double preload_timeout =
      cfg.preload_timeout_s > 0.0 ? cfg.preload_timeout_s : 300.0;
  const auto preload_deadline =
      std::chrono::steady_clock::now() +
      std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(preload_timeout));
  for (;;) {
    StatusView v = parse_status(source.board_status());
    if (v.occupancy[0] == cfg.ring.n_blocks &&
        v.occupancy[1] == cfg.ring.n_blocks) {
      break;
    }
    if (source.failed()) {
      raise(ErrorCode::kSourceStall, "source failed during preload");
    }
    if (std::chrono::steady_clock::now() > preload_deadline) {
      raise(ErrorCode::kTimeout, "staging buffers never filled");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }

  if (receiver) receiver->connect(cfg.bind_addr, board.detections_port());

  // The baseline is sampled before START, when the data plane is
  // provably quiet, so prefill traffic never counts toward the run.
  StatusView before = parse_status(source.board_status());

  std::vector<SecondSample> samples;
  samples.push_back({0.0, before.rx_bytes[0], before.rx_bytes[1], 0});
  std::atomic<bool> sampling{true};
  std::thread sampler;

  source.start_board();
  const auto run_t0 = std::chrono::steady_clock::now();

  sampler = std::thread([&] {
    std::uint64_t tick = 0;
    while (sampling.load()) {
      ++tick;
      std::this_thread::sleep_until(run_t0 + std::chrono::seconds(tick));
      if (!sampling.load()) break;
      try {
        StatusView v = parse_status(source.board_status());
        samples.push_back(
            {std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                           run_t0)
                 .count(),
             v.rx_bytes[0], v.rx_bytes[1], v.slots});
      } catch (const Error&) {
        break;  // session went down; the main loop will report why
      }
    }
  });

  const double run_timeout =
      cfg.run_timeout_s > 0.0
          ? cfg.run_timeout_s
          : (real_time ? static_cast<double>(n_slots) / rep_hz + 180.0
                       : 900.0);
  const auto run_deadline =
      run_t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                   std::chrono::duration<double>(run_timeout));
  StatusView last;
  bool timed_out = false;
  for (;;) {
    last = parse_status(source.board_status());
    if (last.state == "done" || last.state == "failed") break;
    if (std::chrono::steady_clock::now() > run_deadline) {
      timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }

  sampling.store(false);
  if (sampler.joinable()) sampler.join();

  if (last.state == "done") {
    // Refills requested just before the final slot may still be in flight;
    // give them a moment to land so the final snapshot reflects the whole
    // transfer instead of racing the tail of the pipeline.
    const auto settle_deadline =
        std::chrono::steady_clock::now() + std::chrono::seconds(5);
    std::uint64_t prev_rx = last.rx_bytes[0] + last.rx_bytes[1];
    while (std::chrono::steady_clock::now() < settle_deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      const StatusView now = parse_status(source.board_status());
      const std::uint64_t rx = now.rx_bytes[0] + now.rx_bytes[1];
      if (rx == prev_rx) break;
      prev_rx = rx;
    }
  }

  if (last.state == "done" && receiver) {
    // Flush the tail windows, then let the sifting role catch up.
    receiver->finish(n_slots);
    const auto sift_deadline =
        std::chrono::steady_clock::now() + std::chrono::seconds(30);
    while (source.sift_coverage() < n_slots && !source.failed() &&
           std::chrono::steady_clock::now() < sift_deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }

  StatusView fin = parse_status(source.stop_board());

  RunStats& st = res.stats;
  st.mode = to_string(cfg.mode);
  st.duration_s = fin.elapsed_s;
  st.slots = fin.slots;
  st.vacuum_slots = fin.vacuum_slots;
  st.rx_bytes_pol = fin.rx_bytes[0] - before.rx_bytes[0];
  st.rx_bytes_decoy = fin.rx_bytes[1] - before.rx_bytes[1];
  st.rx_blocks_pol = fin.rx_blocks[0];
  st.rx_blocks_decoy = fin.rx_blocks[1];
  st.underruns = fin.underruns;
  st.sequence_gaps = fin.sequence_gaps;

  // Transfer integrity: the rolling ingest hash must equal the producer's
  // digest after the same number of blocks.
  bool rx_ok = true;
  bool rx_compared = false;
  for (int si = 0; si < 2; ++si) {
    StreamId s = static_cast<StreamId>(si);
    if (fin.rx_blocks[si] == 0) continue;
    if (fin.rx_blocks[si] > source.produced_blocks(s)) {
      rx_ok = false;
      continue;
    }
    rx_compared = true;
    rx_ok = rx_ok && source.digest_after(s, fin.rx_blocks[si]) ==
                         fin.rx_hash[si];
  }
  if (rx_compared || !rx_ok) st.rx_hash_ok = rx_ok;

  // Consumption integrity is only block-aligned when the run length makes
  // it so; otherwise it stays unset ("not compared").
  bool cons_ok = true;
  bool cons_compared = false;
  for (int si = 0; si < 2; ++si) {
    StreamId s = static_cast<StreamId>(si);
    std::uint64_t bytes = fin.consumed_words[si] * 4;
    if (bytes == 0 || bytes % cfg.ring.block_bytes != 0) continue;
    std::uint64_t blocks = bytes / cfg.ring.block_bytes;
    if (blocks > source.produced_blocks(s)) {
      cons_ok = false;
      continue;
    }
    cons_compared = true;
    cons_ok =
        cons_ok && source.digest_after(s, blocks) == fin.consumed_hash[si];
  }
  if (cons_compared || !cons_ok) st.consumed_hash_ok = cons_ok;

  std::string sift_trouble;
  if (receiver) {
    st.detections = receiver->detections();
    auto sifted = source.sifted_pairs();
    try {
      SiftStats ss = compute_stats(sifted, receiver->records());
      st.sifted = ss.sifted;
      st.matched = ss.matched;
      st.errors = ss.errors;
      st.qber = ss.qber;
    } catch (const Error& e) {
      // Sift output that cannot be reconciled with the receiver's records
      // fails the run with that reason; it must not abort the runner.
      sift_trouble = e.what();
    }
  }

  if (timed_out) {
    fail("run timed out after " + std::to_string(run_timeout) + " s");
  } else if (last.state == "failed") {
    fail(fin.error.empty() ? "board failed" : fin.error);
  } else if (fin.slots != n_slots) {
    fail("run ended early: " + std::to_string(fin.slots) + " of " +
         std::to_string(n_slots) + " slots");
  } else if (source.failed()) {
    fail("source role failed: " + source.failure_reason());
  } else if (!sift_trouble.empty()) {
    fail(sift_trouble);
  } else if (!st.ok(cfg.qber_threshold)) {
    fail("run statistics out of bounds");
  }

  res.samples = std::move(samples);
  if (!cfg.out_dir.empty()) emit_report(cfg.out_dir, res.stats, res.samples);
  return res;
}

// The photon-counting harvest: two jittered pulse trains, sampled and
// decorrelated, written bottom-up into the block memory and read back by
// halves into a bit file.
ScenarioResult run_qrng_harvest(const ScenarioConfig& cfg) {
  ScenarioResult res;
  std::uint64_t seed_state = cfg.master_seed;
  const std::uint64_t seed_a = splitmix64(seed_state);
  const std::uint64_t seed_b = splitmix64(seed_state);

  const std::size_t half_words = cfg.bram_words / 2;
  const std::uint64_t half_bits = static_cast<std::uint64_t>(half_words) * 32;
  const std::uint64_t n_bits =
      ceil_div(cfg.qrng_bits, half_bits) * half_bits;
  const double window_ns = cfg.clock.tick_ns() * cfg.qrng_window_ticks;
  const double horizon_ns = static_cast<double>(n_bits) * window_ns;

  auto poisson_edges = [&](std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::exponential_distribution<double> gap(cfg.qrng_edge_rate_hz);
    std::vector<double> edges;
    double t_s = 0.0;
    for (;;) {
      t_s += gap(gen);
      double t_ns = t_s * 1e9;
      if (t_ns >= horizon_ns) break;
      edges.push_back(t_ns);
    }
    return edges;
  };

  auto edges_a = poisson_edges(seed_a);
  auto edges_b = poisson_edges(seed_b);
  auto bits_a =
      spd_sample(edges_a, cfg.clock, cfg.qrng_window_ticks, n_bits);
  auto bits_b =
      spd_sample(edges_b, cfg.clock, cfg.qrng_window_ticks, n_bits);
  auto combined = xor_combine(bits_a, bits_b);

  std::vector<std::uint8_t> packed(n_bits / 8, 0);
  for (std::uint64_t i = 0; i < n_bits; ++i) {
    packed[i / 8] |= static_cast<std::uint8_t>((combined[i] & 1) << (i % 8));
  }
  std::vector<std::uint32_t> words(packed.size() / 4);
  words_from_bytes_le(packed, words);

  BlockMemory mem(StreamId::kPol, MemoryDirection::kBottomUp, cfg.bram_words);
  std::vector<std::uint8_t> harvested;
  harvested.reserve(packed.size());
  for (std::size_t off = 0; off < words.size(); off += half_words) {
    auto irq = mem.write_advance(
        std::span<const std::uint32_t>(words.data() + off, half_words),
        static_cast<std::uint64_t>(off));
    if (!irq) {
      raise(ErrorCode::kProtocol, "half-sized write raised no interrupt");
    }
    int half = irq->kind == InterruptKind::kHalfReached ? 0 : 1;
    auto out = mem.host_read_half(half);
    auto bytes = bytes_from_words_le(out);
    harvested.insert(harvested.end(), bytes.begin(), bytes.end());
  }
  if (harvested != packed) {
    raise(ErrorCode::kProtocol, "harvest does not match the written stream");
  }

  RunStats& st = res.stats;
  st.mode = to_string(cfg.mode);
  st.slots = n_bits;  // one emitted bit per sampling window
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream out(cfg.out_dir + "/qrng_bits.bin",
                      std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::kIo, "cannot write qrng_bits.bin");
    out.write(reinterpret_cast<const char*>(harvested.data()),
              static_cast<std::streamsize>(harvested.size()));
    out.close();
    emit_report(cfg.out_dir, st, res.samples);
  }
  return res;
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  if (cfg.mode == ScenarioMode::kQrngBottomUp) return run_qrng_harvest(cfg);
  return run_transmitter(cfg);
}

}  // namespace qkdtwin
