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

#include "qkdtwin/spd_sampler.hpp"

#include <cmath>

#include "qkdtwin/errors.hpp"

namespace qkdtwin {

SpdSampler::SpdSampler(const ClockConfig& cfg, SamplerConfig scfg)
    : scfg_(scfg) {
  cfg.validate();
  if (scfg_.window_ticks == 0) {
    raise(ErrorCode::kInvalidConfig, "window_ticks must be positive");
  }
  window_ns_ = cfg.tick_ns() * scfg_.window_ticks;
}

void SpdSampler::inject_edge(double t_ns) {
  if (t_ns < last_edge_ns_) {
    raise(ErrorCode::kInvalidConfig, "edge timestamps must be nondecreasing");
  }
  last_edge_ns_ = t_ns;
  pending_.push_back(static_cast<std::uint64_t>(t_ns / window_ns_));
}

std::uint8_t SpdSampler::step_window() {
  std::uint8_t raw = 0;
  // Edges belonging to windows already stepped past are dropped; they can
  // only appear after a trigger moved the window index forward.
  while (!pending_.empty() && pending_.front() < window_) pending_.pop_front();
  while (!pending_.empty() && pending_.front() == window_) {
    raw = 1;
    pending_.pop_front();
  }
  const std::uint8_t out = sync_[1];
  sync_[1] = sync_[0];
  sync_[0] = raw;
  ++window_;
  accumulated_.push_back(out);
  return out;
}

std::vector<std::uint8_t> SpdSampler::take_accumulated() {
  std::vector<std::uint8_t> out;
  out.swap(accumulated_);
  return out;
}

void SpdSampler::reset_on_trigger() {
  accumulated_.clear();
  pending_.clear();
  sync_[0] = 0;
  sync_[1] = 0;
}

std::vector<std::uint8_t> spd_sample(std::span<const double> events_ns,
                                     const ClockConfig& cfg,
                                     std::uint32_t window_ticks,
                                     std::size_t n_windows) {
  SpdSampler sampler(cfg, SamplerConfig{window_ticks, n_windows + 1});
  for (double t : events_ns) sampler.inject_edge(t);
  std::vector<std::uint8_t> bits(n_windows);
  for (std::size_t w = 0; w < n_windows; ++w) bits[w] = sampler.step_window();
  return bits;
}

std::vector<std::uint8_t> xor_combine(std::span<const std::uint8_t> a,
                                      std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) {
    raise(ErrorCode::kLengthMismatch,
          "xor_combine inputs differ: " + std::to_string(a.size()) + " vs " +
              std::to_string(b.size()));
  }
  std::vector<std::uint8_t> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = static_cast<std::uint8_t>((a[i] ^ b[i]) & 1u);
  }
  return out;
}

}  // namespace qkdtwin
