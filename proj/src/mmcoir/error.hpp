// Copyright 2026 The mmcoir Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmcoir {

// Numeric values are part of the C ABI (see include/mmcoir.h); append only.
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kIoError = 2,
  kMalformedRow = 3,
  kEmptyItem = 4,
  kImageReadError = 5,
  kProtocolError = 6,
  kTransportError = 7,
  kDimMismatch = 8,
  kCacheCorrupt = 9,
  kDegenerateBatch = 10,
  kNonFiniteLoss = 11,
  kDuplicateId = 12,
  kEmptyPool = 13,
  kCorruptIndex = 14,
  kEmptyCorpus = 15,
  kGuardExhausted = 16,
  kTemplateUnknown = 17,
  kEmptyGeneration = 18,
  kConfigError = 19,
  kNotFound = 20,
  kInternal = 21,
};

/// Stable CamelCase name used in machine-parsable error lines.
std::string_view error_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// "error=<Name> message=<what>" on a single line.
  std::string one_line() const;

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mmcoir
