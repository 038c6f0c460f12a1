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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmcoir/corpus.hpp"
#include "mmcoir/hashing.hpp"

namespace mmcoir {

struct EmbeddingVector {
  std::vector<float> values;
  std::string backend_id;

  std::size_t dim() const noexcept { return values.size(); }
};

/// Scales \p v to unit l2 norm (accumulated in double). Throws
/// Error(kInvalidArgument) for a zero or non-finite vector.
std::vector<float> l2_normalize(std::span<const double> v);
std::vector<float> l2_normalize(std::span<const float> v);

double l2_norm(std::span<const float> v) noexcept;

enum class BackendKind { kBuiltinHash, kRemote };

struct BackendConfig {
  BackendKind kind = BackendKind::kBuiltinHash;
  std::size_t dim = 256;
  std::optional<std::string> endpoint;
  std::size_t token_budget = 256;
  std::optional<std::filesystem::path> cache_dir;
  /// Root for relative image paths.
  std::filesystem::path image_root;
  std::string model = "default";
  std::size_t batch_size = 32;
  std::size_t max_in_flight = 1;
  int max_retries = 3;
  int backoff_ms = 50;
  int timeout_ms = 30000;

  /// Throws Error(kConfigError) when REMOTE lacks an endpoint or dim < 8.
  void validate() const;
};

/// Anything that maps serialized items to unit-norm vectors.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  /// One vector per item, in order.
  virtual std::vector<EmbeddingVector> embed(std::span<const SerializedItem> items) = 0;
};

/// Bytes of an item's image: inline bytes when present, else the file at
/// image_root / image_ref. Throws Error(kImageReadError).
std::string load_image_bytes(const SerializedItem& item, const std::filesystem::path& image_root);

/// Deterministic feature-hashing encoder. Text and code segments contribute
/// signed byte 3-gram counts under per-modality salts; an image contributes a
/// 64-bin byte histogram plus a byte-length feature under the image salt.
/// Each part is scaled to unit norm, the parts are summed, and the sum is
/// normalized.
EmbeddingVector embed_builtin(const SerializedItem& item, std::size_t dim,
                              const std::filesystem::path& image_root = {});

inline constexpr std::string_view kBuiltinBackendId = "builtin-hash-v1";

class BuiltinBackend final : public EmbeddingBackend {
 public:
  BuiltinBackend(std::size_t dim, std::filesystem::path image_root = {});
  std::string id() const override { return std::string(kBuiltinBackendId); }
  std::size_t dim() const override { return dim_; }
  std::vector<EmbeddingVector> embed(std::span<const SerializedItem> items) override;

 private:
  std::size_t dim_;
  std::filesystem::path image_root_;
};

/// Client for the embedding wire protocol. Requests are POSTed to the
/// configured endpoint in batches of cfg.batch_size with up to
/// cfg.max_in_flight concurrent requests; results are reassembled in order
/// and re-normalized.
class RemoteBackend final : public EmbeddingBackend {
 public:
  explicit RemoteBackend(BackendConfig cfg);
  std::string id() const override { return "remote:" + cfg_.model; }
  std::size_t dim() const override { return cfg_.dim; }
  std::vector<EmbeddingVector> embed(std::span<const SerializedItem> items) override;

  std::size_t requests_sent() const noexcept { return requests_.load(); }

 private:
  std::vector<EmbeddingVector> embed_batch(std::span<const SerializedItem> batch);

  BackendConfig cfg_;
  std::atomic<std::size_t> requests_{0};
};

inline constexpr std::string_view kCacheMagic = "MMCOIR-EMB-CACHE";

struct CacheStats {
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::size_t corrupt = 0;
};

/// Persistent per-item cache in front of another backend. Entries are keyed
/// by (backend id, dim, token budget, canonical text digest, image digest)
/// and written with an atomic rename.
class CachedBackend final : public EmbeddingBackend {
 public:
  CachedBackend(std::shared_ptr<EmbeddingBackend> inner, std::filesystem::path cache_dir,
                std::filesystem::path image_root = {});
  std::string id() const override { return inner_->id(); }
  std::size_t dim() const override { return inner_->dim(); }
  std::vector<EmbeddingVector> embed(std::span<const SerializedItem> items) override;

  std::string cache_key(const SerializedItem& item) const;
  std::filesystem::path entry_path(const SerializedItem& item) const;
  const CacheStats& stats() const noexcept { return stats_; }

 private:
  std::optional<std::vector<float>> read_entry(const std::filesystem::path& path);

  std::shared_ptr<EmbeddingBackend> inner_;
  std::filesystem::path dir_;
  std::filesystem::path image_root_;
  CacheStats stats_;
};

/// Builds the backend described by \p cfg, wrapped in a cache when
/// cfg.cache_dir is set.
std::shared_ptr<EmbeddingBackend> make_backend(const BackendConfig& cfg);

/// Content digest of an item's image (empty digest when it has none).
Digest image_digest(const SerializedItem& item, const std::filesystem::path& image_root);

/// Embeds in chunks of \p batch_size, preserving order.
std::vector<EmbeddingVector> embed_all(EmbeddingBackend& backend, std::span<const SerializedItem> items,
                                       std::size_t batch_size = 256);

}  // namespace mmcoir
