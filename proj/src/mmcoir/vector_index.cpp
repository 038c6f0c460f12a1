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

#include "mmcoir/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "mmcoir/error.hpp"
#include "mmcoir/io_util.hpp"

namespace mmcoir {

namespace {
constexpr double kUnitNormTolerance = 1e-6;
constexpr std::uint32_t kMaxDim = 1U << 20;
// Smallest possible on-disk footprint of one entry besides its row: id,
// empty tag length prefix, row number, modality byte.
constexpr std::size_t kMinEntryBytes = 8 + 4 + 8 + 1;

[[noreturn]] void corrupt(std::size_t offset, const std::string& what) {
  raise(ErrorCode::kCorruptIndex, "corrupt index at offset " + std::to_string(offset) + ": " + what);
}

void push_candidate(std::vector<Hit>& heap, std::size_t k, Hit h) {
  if (heap.size() < k) {
    heap.push_back(h);
    std::push_heap(heap.begin(), heap.end(), ranks_before);
  } else if (ranks_before(h, heap.front())) {
    std::pop_heap(heap.begin(), heap.end(), ranks_before);
    heap.back() = h;
    std::push_heap(heap.begin(), heap.end(), ranks_before);
  }
}
}  // namespace

double dot_score(std::span<const float> a, std::span<const float> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

VectorIndex VectorIndex::build(std::span<const EmbeddingVector> vectors, std::span<const ItemId> ids,
                               std::span<const PayloadRef> payloads) {
  if (vectors.size() != ids.size() || vectors.size() != payloads.size()) {
    raise(ErrorCode::kInvalidArgument, "vectors, ids, and payload refs must be aligned");
  }
  VectorIndex idx;
  if (!vectors.empty()) {
    idx.dim_ = vectors.front().dim();
    idx.backend_id_ = vectors.front().backend_id;
  }
  idx.ids_.reserve(ids.size());
  idx.rows_.reserve(vectors.size() * idx.dim_);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto& v = vectors[i];
    if (v.dim() != idx.dim_) {
      raise(ErrorCode::kDimMismatch, "vector " + std::to_string(i) + " has dim " + std::to_string(v.dim()) +
                                         ", index dim is " + std::to_string(idx.dim_));
    }
    if (v.backend_id != idx.backend_id_) {
      raise(ErrorCode::kInvalidArgument, "vectors come from different backends: '" + v.backend_id + "' vs '" +
                                             idx.backend_id_ + "'");
    }
    if (std::abs(l2_norm(v.values) - 1.0) > kUnitNormTolerance) {
      raise(ErrorCode::kInvalidArgument, "vector " + std::to_string(i) + " is not unit norm");
    }
    if (!idx.pos_.emplace(ids[i], i).second) raise(ErrorCode::kDuplicateId, "duplicate id " + std::to_string(ids[i]));
    idx.ids_.push_back(ids[i]);
    idx.rows_.insert(idx.rows_.end(), v.values.begin(), v.values.end());
  }
  idx.payloads_.assign(payloads.begin(), payloads.end());
  return idx;
}

std::size_t VectorIndex::position(ItemId id) const noexcept {
  auto it = pos_.find(id);
  return it == pos_.end() ? size() : it->second;
}

std::vector<double> VectorIndex::score_all(std::span<const float> query) const {
  if (query.size() != dim_) {
    raise(ErrorCode::kDimMismatch, "query dim " + std::to_string(query.size()) + " != index dim " + std::to_string(dim_));
  }
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = dot_score(query, row(i));
  return out;
}

RetrievalResult VectorIndex::search_topk(std::span<const float> query, std::size_t k,
                                         const std::unordered_set<ItemId>& exclude, std::size_t threads) const {
  if (k == 0) raise(ErrorCode::kInvalidArgument, "k must be at least 1");
  if (size() == 0) raise(ErrorCode::kEmptyPool, "index is empty");
  if (query.size() != dim_) {
    raise(ErrorCode::kDimMismatch, "query dim " + std::to_string(query.size()) + " != index dim " + std::to_string(dim_));
  }
  auto scan = [&](std::size_t begin, std::size_t end) {
    std::vector<Hit> heap;
    heap.reserve(std::min(k, end - begin) + 1);
    for (std::size_t i = begin; i < end; ++i) {
      if (!exclude.empty() && exclude.count(ids_[i])) continue;
      push_candidate(heap, k, Hit{ids_[i], dot_score(query, row(i))});
    }
    return heap;
  };

  std::vector<Hit> hits;
  threads = std::max<std::size_t>(1, std::min(threads, size()));
  if (threads == 1) {
    hits = scan(0, size());
  } else {
    std::vector<std::vector<Hit>> partial(threads);
    std::vector<std::thread> pool;
    const std::size_t block = (size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = std::min(size(), t * block);
      const std::size_t e = std::min(size(), b + block);
      pool.emplace_back([&, t, b, e] { partial[t] = scan(b, e); });
    }
    for (auto& th : pool) th.join();
    for (const auto& p : partial) {
      for (const Hit& h : p) push_candidate(hits, k, h);
    }
  }
  std::sort(hits.begin(), hits.end(), ranks_before);
  RetrievalResult r;
  r.hits = std::move(hits);
  r.k = k;
  return r;
}

std::string VectorIndex::serialize() const {
  ByteWriter w;
  w.bytes(kIndexMagic);
  w.u32(static_cast<std::uint32_t>(dim_));
  w.u64(static_cast<std::uint64_t>(size()));
  for (ItemId id : ids_) w.u64(id);
  for (const auto& p : payloads_) {
    w.str(p.dataset_tag);
    w.u64(p.row);
    w.u8(p.modalities.bits());
  }
  for (float x : rows_) w.f32(x);
  // Trailer beyond the fixed layout: producing backend id.
  w.str(backend_id_);
  return w.data();
}

void VectorIndex::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

VectorIndex VectorIndex::deserialize(std::string_view data) {
  ByteReader r(data);
  auto magic = r.bytes(kIndexMagic.size());
  if (!magic || *magic != kIndexMagic) corrupt(0, "bad magic");
  const std::size_t dim_off = r.offset();
  auto dim = r.u32();
  if (!dim) corrupt(dim_off, "truncated header");
  if (*dim == 0 || *dim > kMaxDim) corrupt(dim_off, "implausible dim " + std::to_string(*dim));
  const std::size_t count_off = r.offset();
  auto count = r.u64();
  if (!count) corrupt(count_off, "truncated header");
  // Reject impossible counts before allocating anything proportional to them.
  const std::uint64_t per_entry = kMinEntryBytes + 4ULL * *dim;
  if (*count > r.remaining() / per_entry) {
    corrupt(count_off, "count " + std::to_string(*count) + " exceeds file size");
  }

  VectorIndex idx;
  idx.dim_ = *dim;
  const auto n = static_cast<std::size_t>(*count);
  idx.ids_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t off = r.offset();
    auto id = r.u64();
    if (!id) corrupt(off, "truncated id table");
    if (!idx.pos_.emplace(*id, i).second) corrupt(off, "duplicate id " + std::to_string(*id));
    idx.ids_.push_back(*id);
  }
  idx.payloads_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t off = r.offset();
    auto tag = r.str();
    auto row = r.u64();
    auto mask = r.u8();
    if (!tag || !row || !mask) corrupt(off, "truncated payload table");
    idx.payloads_.push_back(PayloadRef{std::string(*tag), *row, ModalityMask(*mask)});
  }
  const std::size_t rows_off = r.offset();
  if (r.remaining() < n * idx.dim_ * 4) corrupt(rows_off, "truncated vector rows");
  idx.rows_.resize(n * idx.dim_);
  for (auto& x : idx.rows_) x = *r.f32();
  for (std::size_t i = 0; i < n; ++i) {
    const double norm = l2_norm(idx.row(i));
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > kUnitNormTolerance) {
      corrupt(rows_off + i * idx.dim_ * 4, "row " + std::to_string(i) + " is not unit norm");
    }
  }
  if (r.remaining() > 0) {
    const std::size_t off = r.offset();
    auto backend = r.str();
    if (!backend || r.remaining() != 0) corrupt(off, "malformed trailer");
    idx.backend_id_ = std::string(*backend);
  }
  return idx;
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
  auto data = try_read_file(path);
  if (!data) raise(ErrorCode::kIoError, "cannot read index file: " + path.string());
  return deserialize(*data);
}

}  // namespace mmcoir
