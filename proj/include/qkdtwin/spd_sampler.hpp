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

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "qkdtwin/encoding.hpp"

namespace qkdtwin {

struct SamplerConfig {
  /// Width of one sampling window, in emulator clock ticks.
  std::uint32_t window_ticks = 4;
  /// Bits gathered before accumulation_full() reports true. The hardware
  /// only says bits are "temporarily accumulated", so the threshold is
  /// configuration. 1024 bits = 32 words, one small host transfer.
  std::size_t accumulation_threshold_bits = 1024;
};

/// Detector-pulse sampling channel: asynchronous edges are resolved to a
/// window index, pass through a 2-stage synchronizer clocked once per
/// window, and land in an accumulation buffer. An edge injected in window
/// w therefore appears as output bit w+2. Multiple edges in one window
/// still yield a single 1 bit.
class SpdSampler {
 public:
  explicit SpdSampler(const ClockConfig& cfg, SamplerConfig scfg = {});

  /// Queues an asynchronous detector edge at absolute time t_ns.
  /// Timestamps must be nondecreasing.
  void inject_edge(double t_ns);

  /// Advances one sampling window and returns the synchronized output bit
  /// (0 or 1), which is also appended to the accumulation buffer.
  std::uint8_t step_window();

  const std::vector<std::uint8_t>& accumulated() const { return accumulated_; }
  bool accumulation_full() const {
    return accumulated_.size() >= scfg_.accumulation_threshold_bits;
  }
  std::vector<std::uint8_t> take_accumulated();

  /// External trigger: drops accumulated bits, synchronizer contents and
  /// still-pending edges. Output after a trigger depends only on edges
  /// injected after it.
  void reset_on_trigger();

  std::uint64_t window_index() const { return window_; }
  double window_ns() const { return window_ns_; }

 private:
  SamplerConfig scfg_;
  double window_ns_;
  std::uint64_t window_ = 0;
  double last_edge_ns_ = 0.0;
  std::deque<std::uint64_t> pending_;  // window indices of queued edges
  std::uint8_t sync_[2] = {0, 0};
  std::vector<std::uint8_t> accumulated_;
};

/// Batch form: samples a whole edge list into n_windows output bits.
std::vector<std::uint8_t> spd_sample(std::span<const double> events_ns,
                                     const ClockConfig& cfg,
                                     std::uint32_t window_ticks,
                                     std::size_t n_windows);

/// Elementwise exclusive-or of two equal-length bit sequences. Combining
/// two independent streams of bias e halves nothing but squares the bias:
/// the result has bias 2e^2.
std::vector<std::uint8_t> xor_combine(std::span<const std::uint8_t> a,
                                      std::span<const std::uint8_t> b);

}  // namespace qkdtwin
