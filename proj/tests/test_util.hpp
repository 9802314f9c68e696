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

#include <optional>
#include <utility>

#include "qkdtwin/errors.hpp"

namespace qkdtwin_test {

/// Runs f and returns the code of the qkdtwin::Error it threw, or nothing
/// if it completed. Lets tests assert the exact failure category.
template <typename F>
std::optional<qkdtwin::ErrorCode> error_code_of(F&& f) {
  try {
    std::forward<F>(f)();
  } catch (const qkdtwin::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace qkdtwin_test
