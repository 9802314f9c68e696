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

#include <array>
#include <chrono>
#include <cstdint>
#include <span>
#include <vector>

#include "qkdtwin/random_source.hpp"

namespace qkdtwin {

enum class SymbolCategory { kPol, kDecoy };

/// Three-way Bernoulli distributions for the two symbol categories.
/// Sampling is inverse-CDF at fixed resolution: each symbol consumes
/// resolution_bits uniform bits and compares them against cumulative
/// thresholds, so quantization error is at most 2^-resolution_bits per
/// category.
struct BiasConfig {
  std::array<double, 3> p_pol{1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::array<double, 3> p_decoy{0.5, 0.25, 0.25};
  unsigned resolution_bits = 16;

  const std::array<double, 3>& probs(SymbolCategory c) const {
    return c == SymbolCategory::kPol ? p_pol : p_decoy;
  }
  void validate() const;
};

/// Cumulative thresholds scaled to 2^resolution_bits. The last threshold
/// is pinned to 2^resolution_bits so every draw maps to a category.
std::array<std::uint32_t, 3> bias_thresholds(const std::array<double, 3>& p,
                                             unsigned resolution_bits);

/// Maps packed uniform bits (LSB first within each byte) to n symbol codes
/// in {0,1,2}. Needs ceil(n * resolution_bits / 8) input bytes; throws
/// InsufficientEntropy otherwise. Deterministic in its input.
std::vector<std::uint8_t> bias_symbols(std::span<const std::uint8_t> uniform,
                                       const BiasConfig& cfg,
                                       SymbolCategory category, std::size_t n);

/// Fused draw+bias+pack: pulls raw bits from src and writes n symbols
/// packed 4 per byte into out (which must hold ceil(n/4) bytes). Produces
/// exactly the symbols bias_symbols would for the same raw stream.
void bias_pack_symbols(
    RandomBitSource& src, const std::array<std::uint32_t, 3>& thresholds,
    unsigned resolution_bits, std::size_t n, std::span<std::uint8_t> out,
    std::chrono::milliseconds stall_timeout = std::chrono::milliseconds(5000));

}  // namespace qkdtwin
