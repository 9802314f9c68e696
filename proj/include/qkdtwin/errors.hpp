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

#include <stdexcept>
#include <string>

namespace qkdtwin {

/// Failure categories shared across the pipeline. Every library error carries
/// one of these codes so callers can react without string matching.
enum class ErrorCode {
  kInvalidSymbol,
  kInvalidConfig,
  kLengthMismatch,
  kLengthError,
  kOwnershipViolation,
  kUnderrun,
  kBufferFull,
  kBufferDry,
  kTimeout,
  kBadMagic,
  kLengthOverflow,
  kSequenceGap,
  kInsufficientEntropy,
  kSourceStall,
  kIndexOutOfRange,
  kChunkAlreadyReleased,
  kNotReady,
  kIndexMismatch,
  kConnection,
  kProtocol,
  kIo,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidSymbol: return "InvalidSymbol";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kLengthError: return "LengthError";
    case ErrorCode::kOwnershipViolation: return "OwnershipViolation";
    case ErrorCode::kUnderrun: return "Underrun";
    case ErrorCode::kBufferFull: return "BufferFull";
    case ErrorCode::kBufferDry: return "BufferDry";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kLengthOverflow: return "LengthOverflow";
    case ErrorCode::kSequenceGap: return "SequenceGap";
    case ErrorCode::kInsufficientEntropy: return "InsufficientEntropy";
    case ErrorCode::kSourceStall: return "SourceStall";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kChunkAlreadyReleased: return "ChunkAlreadyReleased";
    case ErrorCode::kNotReady: return "NotReady";
    case ErrorCode::kIndexMismatch: return "IndexMismatch";
    case ErrorCode::kConnection: return "Connection";
    case ErrorCode::kProtocol: return "Protocol";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace qkdtwin
