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


#include "mmcoir/infonce.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mmcoir/error.hpp"
#include "mmcoir/linalg.hpp"

namespace mmcoir {

namespace {

struct Projected {
  std::vector<double> x;     // rows x d_in, packed inputs
  std::vector<double> h;     // rows x d_out, normalized
  std::vector<double> norm;  // pre-normalization norms
};

Projected project_rows(const ProjectionHead& head, Side side, const std::vector<std::span<const double>>& rows) {
  const std::size_t d_in = head.d_in();
  const std::size_t d = head.d_out();
  const std::size_t n = rows.size();
  Projected p;
  p.x.resize(n * d_in);
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].size() != d_in) {
      raise(ErrorCode::kDimMismatch,
            "head expects dim " + std::to_string(d_in) + ", got " + std::to_string(rows[r].size()));
    }
    std::copy(rows[r].begin(), rows[r].end(), p.x.begin() + static_cast<std::ptrdiff_t>(r * d_in));
  }
  p.h.resize(n * d);
  if (head.has_bias()) {
    const double* b = head.params().data() + head.bias_offset(side);
    for (std::size_t r = 0; r < n; ++r) std::copy(b, b + d, p.h.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  gemm(false, false, n, d, d_in, 1.0, p.x.data(), head.params().data() + head.weight_offset(side),
       head.has_bias() ? 1.0 : 0.0, p.h.data());
  p.norm.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    double* u = p.h.data() + r * d;
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) ss += u[j] * u[j];
    const double nr = std::sqrt(ss);
    if (!(nr > 0.0) || !std::isfinite(nr)) raise(ErrorCode::kNonFiniteLoss, "projection collapsed to zero or overflowed");
    p.norm[r] = nr;
    for (std::size_t j = 0; j < d; ++j) u[j] /= nr;
  }
  return p;
}

// Pulls dL/dh back through h = u/|u| and u = x^T W + b into grad. dh is
// overwritten with dL/du.
void backprop(const ProjectionHead& head, Side side, const Projected& p, std::vector<double>& dh,
              std::vector<double>& grad) {
  const std::size_t d = head.d_out();
  const std::size_t n = p.norm.size();
  for (std::size_t r = 0; r < n; ++r) {
    const double* h = p.h.data() + r * d;
    double* g = dh.data() + r * d;
    double proj = 0.0;
    for (std::size_t j = 0; j < d; ++j) proj += g[j] * h[j];
    for (std::size_t j = 0; j < d; ++j) g[j] = (g[j] - proj * h[j]) / p.norm[r];
  }
  gemm(true, false, head.d_in(), d, n, 1.0, p.x.data(), dh.data(), 1.0, grad.data() + head.weight_offset(side));
  if (head.has_bias()) {
    double* gb = grad.data() + head.bias_offset(side);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < d; ++j) gb[j] += dh[r * d + j];
    }
  }
}

void check_batch(const PooledBatch& b) {
  const std::size_t n = b.query_rows.size();
  if (n == 0) raise(ErrorCode::kInvalidArgument, "empty batch");
  if (b.positive.size() != n) raise(ErrorCode::kInvalidArgument, "every query needs a positive");
  for (std::size_t i = 0; i < n; ++i) {
    if (b.positive[i] >= b.target_rows.size()) raise(ErrorCode::kInvalidArgument, "positive index out of range");
    const std::size_t hard = i < b.negatives.size() ? b.negatives[i].size() : 0;
    if (n == 1 && hard == 0) {
      raise(ErrorCode::kDegenerateBatch, "batch of one row without hard negatives has no negatives");
    }
    if (hard > 0) {
      for (std::size_t t : b.negatives[i]) {
        if (t >= b.target_rows.size()) raise(ErrorCode::kInvalidArgument, "negative index out of range");
      }
    }
  }
}

double run(const PooledBatch& b, const ProjectionHead& head, const ScoringConfig& cfg, std::vector<double>* grad) {
  cfg.validate();
  check_batch(b);
  const std::size_t n = b.query_rows.size();
  const std::size_t nt = b.target_rows.size();
  const std::size_t d = head.d_out();
  const double inv_tau = 1.0 / cfg.temperature;
  const Projected q = project_rows(head, Side::kQuery, b.query_rows);
  const Projected t = project_rows(head, Side::kTarget, b.target_rows);

  // s[i][c] = hq_i . ht_c / tau for every pooled target.
  std::vector<double> s(n * nt);
  gemm(false, true, n, nt, d, inv_tau, q.h.data(), t.h.data(), 0.0, s.data());
  // g[i][c] = dL/ds[i][c], summed over repeated candidates.
  std::vector<double> g;
  if (grad) g.assign(n * nt, 0.0);

  std::vector<std::size_t> cand;
  std::vector<double> logits;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    cand.push_back(b.positive[i]);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) cand.push_back(b.positive[j]);
    }
    if (i < b.negatives.size()) cand.insert(cand.end(), b.negatives[i].begin(), b.negatives[i].end());

    logits.resize(cand.size());
    double mx = -INFINITY;
    for (std::size_t c = 0; c < cand.size(); ++c) {
      logits[c] = s[i * nt + cand[c]];
      mx = std::max(mx, logits[c]);
    }
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - mx);
    const double lse = mx + std::log(sum);
    total += lse - logits[0];
    if (!grad) continue;
    for (std::size_t c = 0; c < cand.size(); ++c) {
      double w = std::exp(logits[c] - lse);
      if (c == 0) w -= 1.0;
      g[i * nt + cand[c]] += w / static_cast<double>(n);
    }
  }
  const double loss = total / static_cast<double>(n);
  if (grad) {
    std::vector<double> dq(n * d), dt(nt * d);
    gemm(false, false, n, d, nt, inv_tau, g.data(), t.h.data(), 0.0, dq.data());
    gemm(true, false, nt, d, n, inv_tau, g.data(), q.h.data(), 0.0, dt.data());
    grad->assign(head.params().size(), 0.0);
    backprop(head, Side::kQuery, q, dq, *grad);
    backprop(head, Side::kTarget, t, dt, *grad);
  }
  return loss;
}

}  // namespace

void ScoringConfig::validate() const {
  if (!std::isfinite(temperature) || temperature <= 0.0) {
    raise(ErrorCode::kConfigError, "tau (temperature) must be positive, got " + std::to_string(temperature));
  }
}

double log_similarity(std::span<const float> hq, std::span<const float> hr, double tau) {
  if (hq.size() != hr.size()) raise(ErrorCode::kDimMismatch, "similarity of vectors with different dims");
  double s = 0.0;
  for (std::size_t i = 0; i < hq.size(); ++i) s += static_cast<double>(hq[i]) * static_cast<double>(hr[i]);
  return s / tau;
}

double similarity(std::span<const float> hq, std::span<const float> hr, double tau) {
  return std::exp(log_similarity(hq, hr, tau));
}

PooledBatch pool(const TrainingBatch& batch) {
  if (batch.positives.size() != batch.queries.size()) {
    raise(ErrorCode::kInvalidArgument, "queries and positives must be aligned");
  }
  PooledBatch p;
  const std::size_t n = batch.queries.size();
  for (std::size_t i = 0; i < n; ++i) {
    p.query_rows.emplace_back(batch.queries[i]);
    p.target_rows.emplace_back(batch.positives[i]);
    p.positive.push_back(i);
  }
  p.negatives.resize(n);
  for (std::size_t i = 0; i < std::min(n, batch.hard_negatives.size()); ++i) {
    for (const auto& neg : batch.hard_negatives[i]) {
      p.negatives[i].push_back(p.target_rows.size());
      p.target_rows.emplace_back(neg);
    }
  }
  return p;
}

double infonce_loss(const PooledBatch& batch, const ProjectionHead& head, const ScoringConfig& cfg) {
  return run(batch, head, cfg, nullptr);
}

double infonce_loss(const TrainingBatch& batch, const ProjectionHead& head, const ScoringConfig& cfg) {
  return run(pool(batch), head, cfg, nullptr);
}

LossAndGrad infonce_loss_and_grad(const PooledBatch& batch, const ProjectionHead& head, const ScoringConfig& cfg) {
  LossAndGrad out;
  out.loss = run(batch, head, cfg, &out.grad);
  return out;
}

LossAndGrad infonce_loss_and_grad(const TrainingBatch& batch, const ProjectionHead& head,
                                  const ScoringConfig& cfg) {
  return infonce_loss_and_grad(pool(batch), head, cfg);
}

}  // namespace mmcoir
