// Copyright 2026 the qkdtwin authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qkdtwin {

/// One sample of the cumulative run counters, taken roughly once per second.
/// Rates are derived later by differencing consecutive samples.
struct SecondSample {
  double t_s = 0.0;                  // seconds since the run started
  std::uint64_t rx_bytes_pol = 0;    // cumulative data-plane bytes, basis stream
  std::uint64_t rx_bytes_decoy = 0;  // cumulative data-plane bytes, intensity stream
  std::uint64_t slots = 0;           // cumulative emitted slots
};

/// Aggregated results of a scenario run.  Everything optional is only
/// meaningful for some modes (e.g. qber needs the receiver in the loop).
struct RunStats {
  std::string mode;
  double duration_s = 0.0;           // wall time between start and stop
  std::uint64_t slots = 0;
  std::uint64_t vacuum_slots = 0;
  std::uint64_t rx_bytes_pol = 0;
  std::uint64_t rx_bytes_decoy = 0;
  std::uint64_t rx_blocks_pol = 0;
  std::uint64_t rx_blocks_decoy = 0;
  std::uint64_t underruns = 0;
  std::uint64_t sequence_gaps = 0;
  std::uint64_t detections = 0;
  std::uint64_t sifted = 0;
  std::uint64_t matched = 0;
  std::uint64_t errors = 0;
  std::optional<double> qber;
  // Tri-state integrity checks: unset means the run could not compare
  // (e.g. the consumption point did not land on a chunk boundary).
  std::optional<bool> rx_hash_ok;
  std::optional<bool> consumed_hash_ok;

  /// Mean data-plane throughput over the whole run, both streams, in Mb/s.
  double data_mbps() const {
    if (duration_s <= 0.0) return 0.0;
    return static_cast<double>(rx_bytes_pol + rx_bytes_decoy) * 8.0 / 1e6 /
           duration_s;
  }

  /// True when nothing disqualifying happened.  Unset hash checks pass.
  bool ok(double qber_threshold = 0.05) const;
};

/// Writes `second,pol_mbps,decoy_mbps,total_mbps,slots_per_s` rows derived
/// from consecutive cumulative samples.  One row per elapsed second.
void write_throughput_csv(const std::string& path,
                          const std::vector<SecondSample>& samples);

/// Machine-readable run summary.
void write_summary_json(const std::string& path, const RunStats& stats);

/// Short human-readable digest of the same numbers.
void write_summary_text(const std::string& path, const RunStats& stats);

/// Convenience wrapper: creates `dir` if needed and writes throughput.csv,
/// summary.json and summary.txt into it.
void emit_report(const std::string& dir, const RunStats& stats,
                 const std::vector<SecondSample>& samples);

}  // namespace qkdtwin
