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

#include "qkdtwin/qsc.hpp"

#include <algorithm>

#include "qkdtwin/errors.hpp"

namespace qkdtwin {

QStatesController::QStatesController(const ClockConfig& cfg,
                                     const ChannelOffsets& offsets,
                                     SymbolPositionMaps maps)
    : cfg_(cfg), offsets_(offsets), maps_(maps) {
  cfg_.validate();
  offsets_.validate(cfg_);
  pol_.buf.reserve(kPrefetchWords);
  decoy_.buf.reserve(kPrefetchWords);
}

void QStatesController::start() { running_ = true; }

void QStatesController::stop() { running_ = false; }

std::uint64_t QStatesController::consumed_hash(StreamId s) const {
  return s == StreamId::kPol ? pol_.hash.digest() : decoy_.hash.digest();
}

bool QStatesController::ensure_buffered(StreamState& st, BlockMemory& mem,
                                        std::size_t want, std::uint64_t tick,
                                        bool blocking,
                                        const std::atomic<bool>* stop_flag,
                                        InterruptQueue* irqs,
                                        std::optional<InterruptEvent>* irq_out) {
  if (st.pos < st.buf.size()) return true;
  if (blocking) {
    if (!mem.wait_readable(want, *stop_flag)) return false;
  }
  st.buf.resize(want);
  st.pos = 0;
  // Throws Underrun in the non-blocking path when the half is host owned.
  auto irq = mem.read_advance_into(st.buf, tick);
  for (std::uint32_t w : st.buf) st.hash.update_word(w);
  (&st == &pol_ ? counters_.words_pol : counters_.words_decoy) += want;
  if (irq) {
    if (irqs != nullptr) irqs->push(*irq);
    if (irq_out != nullptr) *irq_out = irq;
  }
  return true;
}

QscStepResult QStatesController::step(BlockMemory& pol_mem,
                                      BlockMemory& decoy_mem) {
  if (!running_) raise(ErrorCode::kNotReady, "controller is not started");
  QscStepResult result;
  if (symbols_left_ == 0) {
    const std::uint64_t tick = counters_.slots * cfg_.slot_ticks;
    ensure_buffered(pol_, pol_mem, 1, tick, false, nullptr, nullptr,
                    &result.pol_irq);
    ensure_buffered(decoy_, decoy_mem, 1, tick, false, nullptr, nullptr,
                    &result.decoy_irq);
    pol_.current = pol_.buf[pol_.pos++];
    decoy_.current = decoy_.buf[decoy_.pos++];
    symbols_left_ = 16;
  }
  const std::uint8_t p = pol_.current & 3u;
  const std::uint8_t d = decoy_.current & 3u;
  pol_.current >>= 2;
  decoy_.current >>= 2;
  --symbols_left_;
  result.frame = encode_codes(p, d, counters_.slots, cfg_, offsets_, maps_);
  if (d == static_cast<std::uint8_t>(Intensity::kVacuum)) {
    ++counters_.vacuum_slots;
  }
  ++counters_.slots;
  return result;
}

std::uint64_t QStatesController::advance(BlockMemory& pol_mem,
                                         BlockMemory& decoy_mem,
                                         std::uint64_t max_slots,
                                         FrameSink* sink,
                                         InterruptQueue* pol_irqs,
                                         InterruptQueue* decoy_irqs,
                                         const std::atomic<bool>& stop_flag) {
  if (!running_) raise(ErrorCode::kNotReady, "controller is not started");
  constexpr auto kVac = static_cast<std::uint8_t>(Intensity::kVacuum);
  std::uint64_t done = 0;
  while (done < max_slots) {
    if (symbols_left_ == 0) {
      if (stop_flag.load(std::memory_order_relaxed)) break;
      const std::uint64_t remaining = max_slots - done;
      const auto want = static_cast<std::size_t>(std::min<std::uint64_t>(
          kPrefetchWords, (remaining + 15) / 16));
      const std::uint64_t tick = (counters_.slots + done) * cfg_.slot_ticks;
      if (!ensure_buffered(pol_, pol_mem, want, tick, true, &stop_flag,
                           pol_irqs, nullptr)) {
        break;
      }
      if (!ensure_buffered(decoy_, decoy_mem, want, tick, true, &stop_flag,
                           decoy_irqs, nullptr)) {
        break;
      }
      pol_.current = pol_.buf[pol_.pos++];
      decoy_.current = decoy_.buf[decoy_.pos++];
      symbols_left_ = 16;
    }
    const auto group = static_cast<unsigned>(
        std::min<std::uint64_t>(symbols_left_, max_slots - done));
    std::uint32_t pw = pol_.current;
    std::uint32_t dw = decoy_.current;
    if (sink == nullptr) {
      std::uint64_t vac = 0;
      for (unsigned i = 0; i < group; ++i) {
        const std::uint8_t p = pw & 3u;
        const std::uint8_t d = dw & 3u;
        pw >>= 2;
        dw >>= 2;
        if (p == kReservedCode || d == kReservedCode) {
          raise(ErrorCode::kInvalidSymbol,
                "reserved code 0b11 in slot " +
                    std::to_string(counters_.slots + done + i));
        }
        vac += (d == kVac) ? 1 : 0;
      }
      counters_.vacuum_slots += vac;
    } else {
      for (unsigned i = 0; i < group; ++i) {
        const std::uint8_t p = pw & 3u;
        const std::uint8_t d = dw & 3u;
        pw >>= 2;
        dw >>= 2;
        const PulseFrame frame = encode_codes(p, d, counters_.slots + done + i,
                                              cfg_, offsets_, maps_);
        if (d == kVac) ++counters_.vacuum_slots;
        sink->on_frame(frame);
      }
    }
    pol_.current = pw;
    decoy_.current = dw;
    symbols_left_ -= group;
    done += group;
  }
  counters_.slots += done;
  return done;
}

}  // namespace qkdtwin
