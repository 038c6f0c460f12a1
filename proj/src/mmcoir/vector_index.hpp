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
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mmcoir/corpus.hpp"
#include "mmcoir/embedder.hpp"

namespace mmcoir {

using ItemId = std::uint64_t;

struct PayloadRef {
  std::string dataset_tag;
  std::uint64_t row = 0;
  ModalityMask modalities;

  bool operator==(const PayloadRef&) const = default;
};

struct Hit {
  ItemId id = 0;
  double score = 0.0;

  bool operator==(const Hit&) const = default;
};

struct RetrievalResult {
  std::string query_id;
  std::vector<Hit> hits;  // score descending, ties by ascending id
  std::size_t k = 0;
};

/// Inner product accumulated sequentially in double over float inputs. Every
/// score in the index goes through this one routine.
double dot_score(std::span<const float> a, std::span<const float> b) noexcept;

/// True when \p a should rank before \p b.
inline bool ranks_before(const Hit& a, const Hit& b) noexcept {
  return a.score > b.score || (a.score == b.score && a.id < b.id);
}

inline constexpr std::string_view kIndexMagic = "MMCOIR-IDX1";

/// Immutable exact maximum-inner-product index. Safe for concurrent readers.
class VectorIndex {
 public:
  /// Throws Error(kDuplicateId), Error(kDimMismatch), or
  /// Error(kInvalidArgument) for misaligned inputs or rows off unit norm.
  static VectorIndex build(std::span<const EmbeddingVector> vectors, std::span<const ItemId> ids,
                           std::span<const PayloadRef> payloads);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::string& backend_id() const noexcept { return backend_id_; }
  const std::vector<ItemId>& ids() const noexcept { return ids_; }
  std::span<const float> row(std::size_t pos) const noexcept {
    return std::span<const float>(rows_).subspan(pos * dim_, dim_);
  }
  const PayloadRef& payload(std::size_t pos) const noexcept { return payloads_[pos]; }
  /// Position of \p id, or size() when absent.
  std::size_t position(ItemId id) const noexcept;

  /// Exact top-k over ids not in \p exclude. Returns min(k, eligible) hits;
  /// an all-excluded pool yields no hits. \p threads > 1 scans row blocks in
  /// parallel; the merged answer equals the sequential scan exactly.
  /// Throws Error(kDimMismatch), Error(kEmptyPool) for an empty index, and
  /// Error(kInvalidArgument) for k == 0.
  RetrievalResult search_topk(std::span<const float> query, std::size_t k,
                              const std::unordered_set<ItemId>& exclude = {}, std::size_t threads = 1) const;

  /// Scores of every row, in row order.
  std::vector<double> score_all(std::span<const float> query) const;

  void save(const std::filesystem::path& path) const;
  std::string serialize() const;
  /// Throws Error(kCorruptIndex) carrying the failing byte offset.
  static VectorIndex load(const std::filesystem::path& path);
  static VectorIndex deserialize(std::string_view data);

 private:
  std::size_t dim_ = 0;
  std::string backend_id_;
  std::vector<ItemId> ids_;
  std::vector<float> rows_;
  std::vector<PayloadRef> payloads_;
  std::unordered_map<ItemId, std::size_t> pos_;
};

}  // namespace mmcoir
