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
#include <cstring>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

namespace mmcoir {

/// Little-endian append-only byte sink for the binary file formats.
class ByteWriter {
 public:
  void bytes(std::string_view b) { buf_.append(b); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_le(bits);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_le(bits);
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  const std::string& data() const noexcept { return buf_; }

 private:
  template <typename T>
  void put_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
    }
  }
  std::string buf_;
};

/// Bounds-checked little-endian reader. Every accessor returns nullopt past
/// the end instead of reading out of range.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

  std::optional<std::string_view> bytes(std::size_t n) {
    if (remaining() < n) return std::nullopt;
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::optional<std::uint8_t> u8() { return get_le<std::uint8_t>(); }
  std::optional<std::uint32_t> u32() { return get_le<std::uint32_t>(); }
  std::optional<std::uint64_t> u64() { return get_le<std::uint64_t>(); }
  std::optional<float> f32() {
    auto bits = get_le<std::uint32_t>();
    if (!bits) return std::nullopt;
    float v;
    std::memcpy(&v, &*bits, 4);
    return v;
  }
  std::optional<double> f64() {
    auto bits = get_le<std::uint64_t>();
    if (!bits) return std::nullopt;
    double v;
    std::memcpy(&v, &*bits, 8);
    return v;
  }
  std::optional<std::string_view> str() {
    auto n = u32();
    if (!n) return std::nullopt;
    return bytes(*n);
  }

 private:
  template <typename T>
  std::optional<T> get_le() {
    if (remaining() < sizeof(T)) return std::nullopt;
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<T>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i));
    }
    pos_ += sizeof(T);
    return v;
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

/// Whole-file read; throws Error(kIoError) on failure.
std::string read_file(const std::filesystem::path& path);

/// Whole-file read; nullopt when the file cannot be opened.
std::optional<std::string> try_read_file(const std::filesystem::path& path);

/// Write to a sibling temp file then rename over `path`, so readers see
/// either the old or the new content. Creates parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

std::string base64_encode(std::string_view data);

/// Throws Error(kInvalidArgument) on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace mmcoir
