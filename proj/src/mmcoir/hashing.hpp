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

#include <cstdint>
#include <string>
#include <string_view>

namespace mmcoir {

/// Fixed, platform-independent 64-bit hash (FNV-1a core with a splitmix64
/// finalizer). Every persisted key and every builtin embedding depends on
/// its exact output; do not change it.
std::uint64_t hash64(std::string_view bytes, std::uint64_t seed) noexcept;

std::uint64_t mix64(std::uint64_t x) noexcept;

/// 128-bit content digest built from two independently seeded hash64 passes.
struct Digest {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  std::string hex() const;
  bool operator==(const Digest&) const = default;
};

Digest content_digest(std::string_view bytes) noexcept;

/// Incremental digest over several fields. Each field is length-prefixed so
/// ("ab","c") and ("a","bc") never collide structurally.
class DigestBuilder {
 public:
  DigestBuilder& add(std::string_view field);
  DigestBuilder& add(std::uint64_t value);
  Digest finish() const noexcept { return content_digest(buffer_); }

 private:
  std::string buffer_;
};

std::string hex16(std::uint64_t value);

}  // namespace mmcoir
