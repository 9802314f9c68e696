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

// Command line front end. All the heavy lifting lives in run_scenario;
// this file only maps flags onto a ScenarioConfig.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qkdtwin/errors.hpp"
#include "qkdtwin/scenario.hpp"

namespace {

void print_result(const qkdtwin::ScenarioConfig& cfg,
                  const qkdtwin::ScenarioResult& res) {
  const qkdtwin::RunStats& st = res.stats;
  std::printf("mode            %s\n", st.mode.c_str());
  std::printf("slots           %llu\n",
              static_cast<unsigned long long>(st.slots));
  std::printf("duration        %.3f s\n", st.duration_s);
  std::printf("data throughput %.2f Mb/s\n", st.data_mbps());
  std::printf("underruns       %llu\n",
              static_cast<unsigned long long>(st.underruns));
  std::printf("sequence gaps   %llu\n",
              static_cast<unsigned long long>(st.sequence_gaps));
  auto tri = [](const std::optional<bool>& v) {
    return !v.has_value() ? "not compared" : (*v ? "ok" : "MISMATCH");
  };
  std::printf("transfer hash   %s\n", tri(st.rx_hash_ok));
  std::printf("consumed hash   %s\n", tri(st.consumed_hash_ok));
  if (st.qber.has_value()) {
    std::printf("detections      %llu\n",
                static_cast<unsigned long long>(st.detections));
    std::printf("sifted/matched  %llu/%llu\n",
                static_cast<unsigned long long>(st.sifted),
                static_cast<unsigned long long>(st.matched));
    std::printf("qber            %.5f\n", *st.qber);
  }
  if (!cfg.out_dir.empty()) {
    std::printf("report          %s\n", cfg.out_dir.c_str());
  }
  if (res.exit_code == 0) {
    std::printf("result          PASS\n");
  } else {
    std::printf("result          FAIL (%s)\n", res.failure.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"software twin of a dual-stream quantum transmitter"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "run one scenario to completion");
  std::string config_path;
  std::string mode_text;
  std::string out_dir;
  double duration = -1.0;
  std::uint64_t n_slots = 0;
  std::uint64_t seed = 0;
  bool have_seed = false;
  bool real_time = false;
  double inject_stall = -1.0;
  double stall_seconds = 20.0;
  std::vector<std::string> overrides;

  run->add_option("--config", config_path, "key=value scenario file");
  run->add_option("--mode", mode_text,
                  "tx_loopback | tx_rx_full | qrng_bottom_up | soak");
  run->add_option("--duration", duration, "run length in emitted-slot seconds");
  run->add_option("--slots", n_slots, "exact slot count (overrides duration)");
  run->add_option("--seed", seed, "master seed")->each([&](const std::string&) {
    have_seed = true;
  });
  run->add_option("--out", out_dir, "report directory");
  run->add_flag("--real-time", real_time,
                "pace emission to the configured repetition rate");
  run->add_option("--inject-stall", inject_stall,
                  "freeze the block server this many seconds into the run");
  run->add_option("--stall-seconds", stall_seconds,
                  "how long the injected stall lasts (default 20)");
  run->add_option("--set", overrides,
                  "extra key=value overrides, applied after --config");

  CLI11_PARSE(app, argc, argv);

  try {
    qkdtwin::ScenarioConfig cfg;
    if (!config_path.empty()) cfg = qkdtwin::parse_scenario_file(config_path);
    if (!mode_text.empty()) cfg.mode = qkdtwin::parse_mode(mode_text);
    if (duration >= 0.0) cfg.duration_s = duration;
    if (n_slots != 0) cfg.n_slots = n_slots;
    if (have_seed) cfg.master_seed = seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (real_time) cfg.time_model = qkdtwin::TimeModel::kRealTimeThrottled;
    if (inject_stall >= 0.0) {
      cfg.stall_at_s = inject_stall;
      cfg.stall_seconds = stall_seconds;
    }
    for (const auto& kv : overrides) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) {
        qkdtwin::raise(qkdtwin::ErrorCode::kInvalidConfig,
                       "--set expects key=value, got " + kv);
      }
      qkdtwin::apply_key_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    // Standalone invocations get the conventional port block unless the
    // config or environment says otherwise.
    if (cfg.command_port == 0 && cfg.pol_port == 0 && cfg.decoy_port == 0 &&
        cfg.detections_port == 0) {
      cfg.command_port = 7000;
      cfg.pol_port = 7001;
      cfg.decoy_port = 7002;
      cfg.detections_port = 7003;
    }
    qkdtwin::apply_env_overrides(cfg);

    qkdtwin::ScenarioResult res = qkdtwin::run_scenario(cfg);
    print_result(cfg, res);
    return res.exit_code;
  } catch (const qkdtwin::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
