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
#include "mmcoir/hashing.hpp"

#include <cstdio>

namespace mmcoir {

namespace {
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
constexpr std::uint64_t kDigestSeedHi = 0x6d6d636f69722d68ULL;
constexpr std::uint64_t kDigestSeedLo = 0x6d6d636f69722d6cULL;
}  // namespace

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash64(std::string_view bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = kFnvOffset ^ mix64(seed);
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return mix64(h ^ static_cast<std::uint64_t>(bytes.size()));
}

std::string hex16(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return std::string(buf, 16);
}

std::string Digest::hex() const { return hex16(hi) + hex16(lo); }

Digest content_digest(std::string_view bytes) noexcept {
  return Digest{hash64(bytes, kDigestSeedHi), hash64(bytes, kDigestSeedLo)};
}

DigestBuilder& DigestBuilder::add(std::string_view field) {
  add(static_cast<std::uint64_t>(field.size()));
  buffer_.append(field);
  return *this;
}

DigestBuilder& DigestBuilder::add(std::uint64_t value) {
  for (int i = 0; i < 8; ++i) {
    buffer_.push_back(static_cast<char>((value >> (8 * i)) & 0xffU));
  }
  return *this;
}

}  // namespace mmcoir
