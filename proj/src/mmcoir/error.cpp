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

#include "mmcoir/error.hpp"

namespace mmcoir {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kOk: return "Ok";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kEmptyItem: return "EmptyItem";
    case ErrorCode::kImageReadError: return "ImageReadError";
    case ErrorCode::kProtocolError: return "ProtocolError";
    case ErrorCode::kTransportError: return "TransportError";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kCacheCorrupt: return "CacheCorrupt";
    case ErrorCode::kDegenerateBatch: return "DegenerateBatch";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kEmptyPool: return "EmptyPool";
    case ErrorCode::kCorruptIndex: return "CorruptIndex";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kGuardExhausted: return "GuardExhausted";
    case ErrorCode::kTemplateUnknown: return "TemplateUnknown";
    case ErrorCode::kEmptyGeneration: return "EmptyGeneration";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kInternal: return "Internal";
  }
  return "Unknown";
}

std::string Error::one_line() const {
  std::string msg = what();
  for (char& c : msg) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return "error=" + std::string(error_name(code_)) + " message=" + msg;
}

}  // namespace mmcoir
