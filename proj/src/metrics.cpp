// Copyright 2026 the qkdtwin authors
// SPDX-License-Identifier: Apache-2.0

#include "qkdtwin/metrics.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>

#include "json.hpp"
#include "qkdtwin/errors.hpp"

namespace qkdtwin {

bool RunStats::ok(double qber_threshold) const {
  if (underruns != 0 || sequence_gaps != 0) return false;
  if (rx_hash_ok && !*rx_hash_ok) return false;
  if (consumed_hash_ok && !*consumed_hash_ok) return false;
  if (qber && *qber > qber_threshold) return false;
  return true;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::kIo, "cannot write " + path);
  return out;
}

}  // namespace

void write_throughput_csv(const std::string& path,
                          const std::vector<SecondSample>& samples) {
  auto out = open_out(path);
  out << "second,pol_mbps,decoy_mbps,total_mbps,slots_per_s\n";
  out << std::fixed << std::setprecision(3);
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const auto& a = samples[i - 1];
    const auto& b = samples[i];
    double dt = b.t_s - a.t_s;
    if (dt <= 0.0) continue;
    double pol = static_cast<double>(b.rx_bytes_pol - a.rx_bytes_pol) * 8.0 /
                 1e6 / dt;
    double dec = static_cast<double>(b.rx_bytes_decoy - a.rx_bytes_decoy) *
                 8.0 / 1e6 / dt;
    double slots = static_cast<double>(b.slots - a.slots) / dt;
    out << static_cast<std::uint64_t>(i) << ',' << pol << ',' << dec << ','
        << (pol + dec) << ',' << std::setprecision(0) << slots
        << std::setprecision(3) << '\n';
  }
}

namespace {

nlohmann::json stats_json(const RunStats& s) {
  nlohmann::json j;
  j["mode"] = s.mode;
  j["duration_s"] = s.duration_s;
  j["slots"] = s.slots;
  j["vacuum_slots"] = s.vacuum_slots;
  j["rx_bytes_pol"] = s.rx_bytes_pol;
  j["rx_bytes_decoy"] = s.rx_bytes_decoy;
  j["rx_blocks_pol"] = s.rx_blocks_pol;
  j["rx_blocks_decoy"] = s.rx_blocks_decoy;
  j["data_mbps"] = s.data_mbps();
  j["underruns"] = s.underruns;
  j["sequence_gaps"] = s.sequence_gaps;
  j["detections"] = s.detections;
  j["sifted"] = s.sifted;
  j["matched"] = s.matched;
  j["errors"] = s.errors;
  j["qber"] = s.qber ? nlohmann::json(*s.qber) : nlohmann::json();
  j["rx_hash_ok"] = s.rx_hash_ok ? nlohmann::json(*s.rx_hash_ok)
                                 : nlohmann::json();
  j["consumed_hash_ok"] = s.consumed_hash_ok
                              ? nlohmann::json(*s.consumed_hash_ok)
                              : nlohmann::json();
  j["ok"] = s.ok();
  return j;
}

}  // namespace

void write_summary_json(const std::string& path, const RunStats& stats) {
  auto out = open_out(path);
  out << stats_json(stats).dump(2) << '\n';
}

void write_summary_text(const std::string& path, const RunStats& stats) {
  auto out = open_out(path);
  out << "mode:            " << stats.mode << '\n';
  out << "duration:        " << std::fixed << std::setprecision(3)
      << stats.duration_s << " s\n";
  out << "slots:           " << stats.slots << " (" << stats.vacuum_slots
      << " vacuum)\n";
  out << "data plane:      " << std::setprecision(2) << stats.data_mbps()
      << " Mb/s mean (" << stats.rx_bytes_pol + stats.rx_bytes_decoy
      << " bytes)\n";
  out << "blocks:          " << stats.rx_blocks_pol << " pol / "
      << stats.rx_blocks_decoy << " decoy\n";
  out << "underruns:       " << stats.underruns << '\n';
  out << "sequence gaps:   " << stats.sequence_gaps << '\n';
  if (stats.detections != 0 || stats.sifted != 0) {
    out << "detections:      " << stats.detections << '\n';
    out << "sifted:          " << stats.sifted << " (" << stats.matched
        << " matched, " << stats.errors << " errors)\n";
  }
  if (stats.qber) {
    out << "qber:            " << std::setprecision(5) << *stats.qber << '\n';
  }
  auto tri = [](const std::optional<bool>& v) {
    return !v ? "not compared" : (*v ? "ok" : "MISMATCH");
  };
  out << "rx hash:         " << tri(stats.rx_hash_ok) << '\n';
  out << "consumed hash:   " << tri(stats.consumed_hash_ok) << '\n';
  out << "result:          " << (stats.ok() ? "ok" : "FAILED") << '\n';
}

void emit_report(const std::string& dir, const RunStats& stats,
                 const std::vector<SecondSample>& samples) {
  std::filesystem::create_directories(dir);
  write_throughput_csv(dir + "/throughput.csv", samples);
  write_summary_json(dir + "/summary.json", stats);
  write_summary_text(dir + "/summary.txt", stats);
}

}  // namespace qkdtwin
