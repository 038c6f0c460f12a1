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

#include "mmcoir/projection_head.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "mmcoir/error.hpp"
#include "mmcoir/hashing.hpp"
#include "mmcoir/io_util.hpp"
#include "mmcoir/linalg.hpp"
#include "mmcoir/rng.hpp"

namespace mmcoir {

namespace {
constexpr std::uint8_t kFlagBias = 1;
constexpr std::uint8_t kFlagShared = 2;
}  // namespace

ProjectionHead::ProjectionHead(std::size_t d_in, std::size_t d_out, bool shared, bool bias)
    : d_in_(d_in), d_out_(d_out), shared_(shared), bias_(bias) {
  if (d_in == 0 || d_out == 0) raise(ErrorCode::kInvalidArgument, "projection dims must be positive");
  params_.assign(map_size() * (shared ? 1 : 2), 0.0);
}

ProjectionHead ProjectionHead::identity_init(std::size_t d_in, std::size_t d_out, bool shared, bool bias,
                                             std::uint64_t seed, double noise) {
  ProjectionHead h(d_in, d_out, shared, bias);
  h.seed = seed;
  SeededRng rng(seed);
  for (int s = 0; s < (shared ? 1 : 2); ++s) {
    const Side side = s == 0 ? Side::kQuery : Side::kTarget;
    double* w = h.params_.data() + h.weight_offset(side);
    for (std::size_t i = 0; i < d_in; ++i) {
      for (std::size_t j = 0; j < d_out; ++j) {
        w[i * d_out + j] = (i == j ? 1.0 : 0.0) + rng.uniform(-noise, noise);
      }
    }
  }
  return h;
}

std::size_t ProjectionHead::weight_offset(Side side) const noexcept {
  return (side == Side::kTarget && !shared_) ? map_size() : 0;
}

std::size_t ProjectionHead::bias_offset(Side side) const noexcept { return weight_offset(side) + d_in_ * d_out_; }

void ProjectionHead::apply(Side side, std::span<const double> x, std::span<double> out) const {
  if (x.size() != d_in_) {
    raise(ErrorCode::kDimMismatch, "head expects dim " + std::to_string(d_in_) + ", got " + std::to_string(x.size()));
  }
  const double* w = params_.data() + weight_offset(side);
  if (bias_) {
    const double* b = params_.data() + bias_offset(side);
    for (std::size_t j = 0; j < d_out_; ++j) out[j] = b[j];
  } else {
    for (std::size_t j = 0; j < d_out_; ++j) out[j] = 0.0;
  }
  for (std::size_t i = 0; i < d_in_; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* wr = w + i * d_out_;
    for (std::size_t j = 0; j < d_out_; ++j) out[j] += xi * wr[j];
  }
}

EmbeddingVector ProjectionHead::project(Side side, const EmbeddingVector& v) const {
  return std::move(project_all(side, std::span<const EmbeddingVector>(&v, 1)).front());
}

std::vector<EmbeddingVector> ProjectionHead::project_all(Side side, std::span<const EmbeddingVector> vs) const {
  const std::size_t n = vs.size();
  std::vector<double> x(n * d_in_);
  for (std::size_t r = 0; r < n; ++r) {
    if (vs[r].dim() != d_in_) {
      raise(ErrorCode::kDimMismatch, "head expects dim " + std::to_string(d_in_) + ", got " + std::to_string(vs[r].dim()));
    }
    std::copy(vs[r].values.begin(), vs[r].values.end(), x.begin() + static_cast<std::ptrdiff_t>(r * d_in_));
  }
  std::vector<double> u(n * d_out_, 0.0);
  if (bias_) {
    const double* b = params_.data() + bias_offset(side);
    for (std::size_t r = 0; r < n; ++r) std::copy(b, b + d_out_, u.begin() + static_cast<std::ptrdiff_t>(r * d_out_));
  }
  gemm(false, false, n, d_out_, d_in_, 1.0, x.data(), params_.data() + weight_offset(side), bias_ ? 1.0 : 0.0,
       u.data());
  std::vector<EmbeddingVector> out(n);
  const std::string tag = n ? "+head:" + fingerprint() : std::string();
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = u.data() + r * d_out_;
    double ss = 0.0;
    for (std::size_t j = 0; j < d_out_; ++j) ss += row[j] * row[j];
    if (!(ss > 0.0) || !std::isfinite(ss)) raise(ErrorCode::kNonFiniteLoss, "projection collapsed to zero or overflowed");
    out[r].values = l2_normalize(std::span<const double>(u.data() + r * d_out_, d_out_));
    out[r].backend_id = vs[r].backend_id + tag;
  }
  return out;
}

std::string ProjectionHead::serialize() const {
  ByteWriter w;
  w.bytes(kHeadMagic);
  w.u32(static_cast<std::uint32_t>(d_in_));
  w.u32(static_cast<std::uint32_t>(d_out_));
  w.u8(static_cast<std::uint8_t>((bias_ ? kFlagBias : 0) | (shared_ ? kFlagShared : 0)));
  const int maps = shared_ ? 1 : 2;
  for (int s = 0; s < maps; ++s) {
    const std::size_t off = weight_offset(s == 0 ? Side::kQuery : Side::kTarget);
    for (std::size_t k = 0; k < d_in_ * d_out_; ++k) w.f64(params_[off + k]);
  }
  if (bias_) {
    for (int s = 0; s < maps; ++s) {
      const std::size_t off = bias_offset(s == 0 ? Side::kQuery : Side::kTarget);
      for (std::size_t k = 0; k < d_out_; ++k) w.f64(params_[off + k]);
    }
  }
  w.u64(seed);
  w.u64(step);
  return w.data();
}

void ProjectionHead::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

ProjectionHead ProjectionHead::deserialize(std::string_view data) {
  ByteReader r(data);
  auto bad = [&](const std::string& what) -> ProjectionHead {
    raise(ErrorCode::kInvalidArgument, "corrupt head checkpoint at offset " + std::to_string(r.offset()) + ": " + what);
  };
  auto magic = r.bytes(kHeadMagic.size());
  if (!magic || *magic != kHeadMagic) return bad("bad magic");
  auto d_in = r.u32();
  auto d_out = r.u32();
  auto flags = r.u8();
  if (!d_in || !d_out || !flags) return bad("truncated header");
  if (*d_in == 0 || *d_out == 0 || *d_in > (1U << 16) || *d_out > (1U << 16)) return bad("implausible dims");
  const bool shared = (*flags & kFlagShared) != 0;
  const bool bias = (*flags & kFlagBias) != 0;
  const std::size_t maps = shared ? 1 : 2;
  const std::size_t expected = 8 * maps * (static_cast<std::size_t>(*d_in) * *d_out + (bias ? *d_out : 0)) + 16;
  if (r.remaining() != expected) return bad("size does not match header");
  ProjectionHead h(*d_in, *d_out, shared, bias);
  for (std::size_t s = 0; s < maps; ++s) {
    const std::size_t off = h.weight_offset(s == 0 ? Side::kQuery : Side::kTarget);
    for (std::size_t k = 0; k < h.d_in_ * h.d_out_; ++k) h.params_[off + k] = *r.f64();
  }
  if (bias) {
    for (std::size_t s = 0; s < maps; ++s) {
      const std::size_t off = h.bias_offset(s == 0 ? Side::kQuery : Side::kTarget);
      for (std::size_t k = 0; k < h.d_out_; ++k) h.params_[off + k] = *r.f64();
    }
  }
  h.seed = *r.u64();
  h.step = *r.u64();
  for (double p : h.params_) {
    if (!std::isfinite(p)) return bad("non-finite parameter");
  }
  return h;
}

ProjectionHead ProjectionHead::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

std::string ProjectionHead::fingerprint() const { return content_digest(serialize()).hex().substr(0, 16); }

}  // namespace mmcoir
