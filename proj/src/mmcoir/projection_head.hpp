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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mmcoir/embedder.hpp"

namespace mmcoir {

enum class Side { kQuery, kTarget };

/// Trainable linear maps applied to frozen backend embeddings, followed by
/// l2 normalization. Either one map serves both sides (shared) or queries
/// and targets get their own.
///
/// Parameters live in one flat vector: query weights (d_in x d_out,
/// row-major), query bias (when enabled), then the same for the target map
/// unless shared. A map sends x to x^T W + b.
class ProjectionHead {
 public:
  ProjectionHead() = default;
  ProjectionHead(std::size_t d_in, std::size_t d_out, bool shared, bool bias);

  /// Identity in the leading min(d_in, d_out) diagonal plus uniform noise
  /// in [-noise, noise], drawn from a SeededRng(seed).
  static ProjectionHead identity_init(std::size_t d_in, std::size_t d_out, bool shared, bool bias,
                                      std::uint64_t seed, double noise = 1e-3);

  std::size_t d_in() const noexcept { return d_in_; }
  std::size_t d_out() const noexcept { return d_out_; }
  bool shared() const noexcept { return shared_; }
  bool has_bias() const noexcept { return bias_; }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  /// Offset of a side's weight block (and bias block) inside params().
  std::size_t weight_offset(Side side) const noexcept;
  std::size_t bias_offset(Side side) const noexcept;
  std::size_t map_size() const noexcept { return d_in_ * d_out_ + (bias_ ? d_out_ : 0); }

  /// Pre-normalization output x^T W + b.
  void apply(Side side, std::span<const double> x, std::span<double> out) const;

  /// Projects and normalizes. Results are tagged "<input id>+head:<fingerprint>"
  /// so vectors from different heads never share an index.
  EmbeddingVector project(Side side, const EmbeddingVector& v) const;
  std::vector<EmbeddingVector> project_all(Side side, std::span<const EmbeddingVector> vs) const;

  std::uint64_t seed = 0;
  std::uint64_t step = 0;

  void save(const std::filesystem::path& path) const;
  std::string serialize() const;
  static ProjectionHead load(const std::filesystem::path& path);
  static ProjectionHead deserialize(std::string_view data);

  /// Digest of the serialized head, used in report fingerprints.
  std::string fingerprint() const;

  bool operator==(const ProjectionHead&) const = default;

 private:
  std::size_t d_in_ = 0;
  std::size_t d_out_ = 0;
  bool shared_ = true;
  bool bias_ = false;
  std::vector<double> params_;
};

inline constexpr std::string_view kHeadMagic = "MMCOIR-HEAD";

}  // namespace mmcoir
