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

#include "mmcoir/embedder.hpp"

#include <array>
#include <cmath>
#include <future>

#include <json.hpp>

#include "mmcoir/error.hpp"
#include "mmcoir/http_transport.hpp"
#include "mmcoir/io_util.hpp"

namespace mmcoir {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {
constexpr std::uint64_t kBuiltinSeed = 0x6d6d636f69720001ULL;
constexpr std::uint64_t kTextSalt = 0x7465787400000000ULL;
constexpr std::uint64_t kCodeSalt = 0x636f646500000000ULL;
constexpr std::uint64_t kImageSalt = 0x696d616765000000ULL;
}  // namespace

double l2_norm(std::span<const float> v) noexcept {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

std::vector<float> l2_normalize(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  const double n = std::sqrt(s);
  if (!(n > 0.0) || !std::isfinite(n)) raise(ErrorCode::kInvalidArgument, "cannot normalize a zero or non-finite vector");
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / n);
  return out;
}

std::vector<float> l2_normalize(std::span<const float> v) {
  std::vector<double> d(v.begin(), v.end());
  return l2_normalize(std::span<const double>(d));
}

void BackendConfig::validate() const {
  if (dim < 8) raise(ErrorCode::kConfigError, "backend dim must be at least 8");
  if (kind == BackendKind::kRemote && (!endpoint || endpoint->empty())) {
    raise(ErrorCode::kConfigError, "remote backend requires an endpoint");
  }
  if (token_budget == 0) raise(ErrorCode::kConfigError, "token budget must be positive");
  if (batch_size == 0) raise(ErrorCode::kConfigError, "batch size must be positive");
  if (max_in_flight == 0) raise(ErrorCode::kConfigError, "max_in_flight must be positive");
}

std::string load_image_bytes(const SerializedItem& item, const fs::path& image_root) {
  if (item.image_bytes) return *item.image_bytes;
  if (!item.image_ref) raise(ErrorCode::kImageReadError, "item has no image");
  const fs::path path = image_root.empty() ? fs::path(*item.image_ref) : image_root / *item.image_ref;
  auto data = try_read_file(path);
  if (!data) raise(ErrorCode::kImageReadError, "cannot read image: " + path.string());
  return std::move(*data);
}

Digest image_digest(const SerializedItem& item, const fs::path& image_root) {
  if (!item.image_bytes && !item.image_ref) return {};
  return content_digest(load_image_bytes(item, image_root));
}

namespace {

void add_hashed(std::vector<double>& acc, std::string_view key, std::uint64_t salt, double weight) {
  const std::uint64_t h = hash64(key, kBuiltinSeed ^ salt);
  const std::size_t bucket = static_cast<std::size_t>(h % acc.size());
  acc[bucket] += (h >> 63) ? -weight : weight;
}

bool normalize_in_place(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  if (s <= 0.0) return false;
  const double inv = 1.0 / std::sqrt(s);
  for (double& x : v) x *= inv;
  return true;
}

}  // namespace

EmbeddingVector embed_builtin(const SerializedItem& item, std::size_t dim, const fs::path& image_root) {
  if (dim < 8) raise(ErrorCode::kInvalidArgument, "builtin embedding dim must be at least 8");
  std::vector<double> text(dim, 0.0);
  for (const Segment& seg : item.segments) {
    const std::string_view s = std::string_view(item.canonical_text).substr(seg.offset, seg.length);
    const std::uint64_t salt = seg.modality == Modality::kCode ? kCodeSalt : kTextSalt;
    if (s.size() < 3) {
      if (!s.empty()) add_hashed(text, s, salt, 1.0);
      continue;
    }
    for (std::size_t i = 0; i + 3 <= s.size(); ++i) add_hashed(text, s.substr(i, 3), salt, 1.0);
  }
  const bool has_text = normalize_in_place(text);

  std::vector<double> image(dim, 0.0);
  bool has_image = false;
  if (item.image_bytes || item.image_ref) {
    const std::string bytes = load_image_bytes(item, image_root);
    if (bytes.empty()) raise(ErrorCode::kImageReadError, "image is empty: " + item.image_ref.value_or("<inline>"));
    std::array<std::size_t, 64> hist{};
    for (unsigned char b : bytes) ++hist[b >> 2];
    const double n = static_cast<double>(bytes.size());
    for (int bin = 0; bin < 64; ++bin) {
      if (hist[bin] == 0) continue;
      const char key[5] = {'h', 'i', 's', 't', static_cast<char>(bin)};
      add_hashed(image, std::string_view(key, 5), kImageSalt, static_cast<double>(hist[bin]) / n);
    }
    add_hashed(image, "len", kImageSalt, std::log2(1.0 + n) / 32.0);
    has_image = normalize_in_place(image);
  }

  if (!has_text && !has_image) raise(ErrorCode::kEmptyItem, "item has nothing to embed");
  std::vector<double> sum(dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) sum[i] = text[i] + image[i];
  EmbeddingVector out;
  out.values = l2_normalize(std::span<const double>(sum));
  out.backend_id = std::string(kBuiltinBackendId);
  return out;
}

BuiltinBackend::BuiltinBackend(std::size_t dim, fs::path image_root) : dim_(dim), image_root_(std::move(image_root)) {
  if (dim_ < 8) raise(ErrorCode::kConfigError, "backend dim must be at least 8");
}

std::vector<EmbeddingVector> BuiltinBackend::embed(std::span<const SerializedItem> items) {
  std::vector<EmbeddingVector> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(embed_builtin(item, dim_, image_root_));
  return out;
}

// --- Remote -----------------------------------------------------------------------

RemoteBackend::RemoteBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.kind = BackendKind::kRemote;
  cfg_.validate();
  parse_endpoint(*cfg_.endpoint);
}

std::vector<EmbeddingVector> RemoteBackend::embed_batch(std::span<const SerializedItem> batch) {
  json req;
  req["model"] = cfg_.model;
  req["dim"] = cfg_.dim;
  req["max_tokens"] = batch.front().token_budget > 0 ? batch.front().token_budget : cfg_.token_budget;
  json items = json::array();
  for (const auto& item : batch) {
    json it;
    it["text"] = item.canonical_text;
    it["image_path"] = nullptr;
    it["image_b64"] = nullptr;
    if (item.image_bytes) {
      it["image_b64"] = base64_encode(*item.image_bytes);
    } else if (item.image_ref) {
      const fs::path p = cfg_.image_root.empty() ? fs::path(*item.image_ref) : cfg_.image_root / *item.image_ref;
      it["image_path"] = p.string();
    }
    items.push_back(std::move(it));
  }
  req["items"] = std::move(items);

  ++requests_;
  const std::string body =
      post_json(*cfg_.endpoint, req.dump(), RetryPolicy{cfg_.max_retries, cfg_.backoff_ms, cfg_.timeout_ms});

  json resp = json::parse(body, nullptr, false);
  if (resp.is_discarded() || !resp.is_object()) raise(ErrorCode::kProtocolError, "embedding response is not a JSON object");
  if (!resp.contains("dim") || !resp["dim"].is_number_integer()) {
    raise(ErrorCode::kProtocolError, "embedding response lacks integer 'dim'");
  }
  if (!resp.contains("vectors") || !resp["vectors"].is_array()) {
    raise(ErrorCode::kProtocolError, "embedding response lacks array 'vectors'");
  }
  const auto dim = resp["dim"].get<std::int64_t>();
  if (dim != static_cast<std::int64_t>(cfg_.dim)) {
    raise(ErrorCode::kDimMismatch, "server returned dim " + std::to_string(dim) + " but config expects " +
                                       std::to_string(cfg_.dim));
  }
  const json& vectors = resp["vectors"];
  if (vectors.size() != batch.size()) {
    raise(ErrorCode::kProtocolError, "server returned " + std::to_string(vectors.size()) + " vectors for " +
                                         std::to_string(batch.size()) + " items");
  }
  std::vector<EmbeddingVector> out;
  out.reserve(batch.size());
  for (const json& row : vectors) {
    if (!row.is_array()) raise(ErrorCode::kProtocolError, "vector row is not an array");
    if (row.size() != cfg_.dim) {
      raise(ErrorCode::kDimMismatch, "vector row has length " + std::to_string(row.size()) + ", expected " +
                                         std::to_string(cfg_.dim));
    }
    std::vector<double> v;
    v.reserve(row.size());
    for (const json& x : row) {
      if (!x.is_number()) raise(ErrorCode::kProtocolError, "vector entry is not a number");
      v.push_back(x.get<double>());
    }
    EmbeddingVector e;
    try {
      e.values = l2_normalize(std::span<const double>(v));
    } catch (const Error&) {
      raise(ErrorCode::kProtocolError, "server returned a zero or non-finite vector");
    }
    e.backend_id = id();
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<EmbeddingVector> RemoteBackend::embed(std::span<const SerializedItem> items) {
  if (items.empty()) raise(ErrorCode::kInvalidArgument, "embedding batch is empty");
  std::vector<std::span<const SerializedItem>> batches;
  for (std::size_t i = 0; i < items.size(); i += cfg_.batch_size) {
    batches.push_back(items.subspan(i, std::min(cfg_.batch_size, items.size() - i)));
  }
  std::vector<std::vector<EmbeddingVector>> results(batches.size());
  for (std::size_t wave = 0; wave < batches.size(); wave += cfg_.max_in_flight) {
    const std::size_t end = std::min(batches.size(), wave + cfg_.max_in_flight);
    if (end - wave == 1) {
      results[wave] = embed_batch(batches[wave]);
      continue;
    }
    std::vector<std::future<std::vector<EmbeddingVector>>> inflight;
    for (std::size_t b = wave; b < end; ++b) {
      inflight.push_back(std::async(std::launch::async, [this, span = batches[b]] { return embed_batch(span); }));
    }
    for (std::size_t b = wave; b < end; ++b) results[b] = inflight[b - wave].get();
  }
  std::vector<EmbeddingVector> out;
  out.reserve(items.size());
  for (auto& r : results) {
    for (auto& v : r) out.push_back(std::move(v));
  }
  return out;
}

// --- Cache ---------------------------------------------------------------------------

CachedBackend::CachedBackend(std::shared_ptr<EmbeddingBackend> inner, fs::path cache_dir, fs::path image_root)
    : inner_(std::move(inner)), dir_(std::move(cache_dir)), image_root_(std::move(image_root)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) raise(ErrorCode::kIoError, "cannot create cache dir: " + dir_.string());
}

std::string CachedBackend::cache_key(const SerializedItem& item) const {
  DigestBuilder b;
  b.add(inner_->id()).add(static_cast<std::uint64_t>(inner_->dim())).add(static_cast<std::uint64_t>(item.token_budget));
  b.add(content_digest(item.canonical_text).hex());
  b.add(image_digest(item, image_root_).hex());
  for (const Segment& s : item.segments) {
    b.add(static_cast<std::uint64_t>(s.modality)).add(static_cast<std::uint64_t>(s.offset)).add(
        static_cast<std::uint64_t>(s.length));
  }
  return b.finish().hex();
}

fs::path CachedBackend::entry_path(const SerializedItem& item) const { return dir_ / (cache_key(item) + ".emb"); }

std::optional<std::vector<float>> CachedBackend::read_entry(const fs::path& path) {
  auto data = try_read_file(path);
  if (!data) return std::nullopt;
  ByteReader r(*data);
  auto magic = r.bytes(kCacheMagic.size());
  auto dim = r.u32();
  const bool header_ok = magic && *magic == kCacheMagic && dim && *dim == inner_->dim() &&
                         r.remaining() == static_cast<std::size_t>(*dim) * 4;
  if (!header_ok) {
    ++stats_.corrupt;
    return std::nullopt;
  }
  std::vector<float> v(*dim);
  for (auto& x : v) {
    x = *r.f32();
    if (!std::isfinite(x)) {
      ++stats_.corrupt;
      return std::nullopt;
    }
  }
  return v;
}

std::vector<EmbeddingVector> CachedBackend::embed(std::span<const SerializedItem> items) {
  std::vector<EmbeddingVector> out(items.size());
  std::vector<fs::path> paths(items.size());
  std::vector<std::size_t> miss_idx;
  std::vector<SerializedItem> misses;
  for (std::size_t i = 0; i < items.size(); ++i) {
    paths[i] = entry_path(items[i]);
    if (auto v = read_entry(paths[i])) {
      ++stats_.hits;
      out[i].values = std::move(*v);
      out[i].backend_id = inner_->id();
    } else {
      ++stats_.misses;
      miss_idx.push_back(i);
      misses.push_back(items[i]);
    }
  }
  if (!misses.empty()) {
    auto fresh = inner_->embed(misses);
    for (std::size_t m = 0; m < miss_idx.size(); ++m) {
      ByteWriter w;
      w.bytes(kCacheMagic);
      w.u32(static_cast<std::uint32_t>(fresh[m].dim()));
      for (float x : fresh[m].values) w.f32(x);
      write_file_atomic(paths[miss_idx[m]], w.data());
      out[miss_idx[m]] = std::move(fresh[m]);
    }
  }
  return out;
}

std::shared_ptr<EmbeddingBackend> make_backend(const BackendConfig& cfg) {
  cfg.validate();
  std::shared_ptr<EmbeddingBackend> backend;
  if (cfg.kind == BackendKind::kBuiltinHash) {
    backend = std::make_shared<BuiltinBackend>(cfg.dim, cfg.image_root);
  } else {
    backend = std::make_shared<RemoteBackend>(cfg);
  }
  if (cfg.cache_dir) backend = std::make_shared<CachedBackend>(backend, *cfg.cache_dir, cfg.image_root);
  return backend;
}

std::vector<EmbeddingVector> embed_all(EmbeddingBackend& backend, std::span<const SerializedItem> items,
                                       std::size_t batch_size) {
  std::vector<EmbeddingVector> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); i += batch_size) {
    auto part = backend.embed(items.subspan(i, std::min(batch_size, items.size() - i)));
    for (auto& v : part) out.push_back(std::move(v));
  }
  return out;
}

}  // namespace mmcoir
