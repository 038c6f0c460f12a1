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
#include <span>
#include <vector>

#include "mmcoir/projection_head.hpp"

namespace mmcoir {

struct ScoringConfig {
  double temperature = 0.02;

  /// Throws Error(kConfigError) unless temperature is finite and positive.
  void validate() const;
};

/// phi(q, r) = exp(hq . hr / tau) over unit vectors.
double similarity(std::span<const float> hq, std::span<const float> hr, double tau);
/// log phi, which is what the loss works with.
double log_similarity(std::span<const float> hq, std::span<const float> hr, double tau);

/// Backend embeddings (before projection) for one step. Row i's candidates
/// are its positive, every other row's positive, and its hard negatives.
struct TrainingBatch {
  std::vector<std::vector<double>> queries;
  std::vector<std::vector<double>> positives;
  /// Per row; may be empty or shorter than queries.
  std::vector<std::vector<std::vector<double>>> hard_negatives;
};

/// Same batch with rows shared by reference. Several rows may point at one
/// target; the loss is identical to the unshared form.
struct PooledBatch {
  std::vector<std::span<const double>> query_rows;
  std::vector<std::span<const double>> target_rows;
  std::vector<std::size_t> positive;                  // per query, into target_rows
  std::vector<std::vector<std::size_t>> negatives;    // per query, into target_rows
};

PooledBatch pool(const TrainingBatch& batch);

struct LossAndGrad {
  double loss = 0.0;
  /// Aligned with ProjectionHead::params().
  std::vector<double> grad;
};

/// Mean contrastive loss over rows, computed with log-sum-exp. Throws
/// Error(kDegenerateBatch) when some row has no negative at all.
double infonce_loss(const PooledBatch& batch, const ProjectionHead& head, const ScoringConfig& cfg);
double infonce_loss(const TrainingBatch& batch, const ProjectionHead& head, const ScoringConfig& cfg);

/// Loss plus its exact gradient with respect to every head parameter,
/// including the path through the l2 normalization.
LossAndGrad infonce_loss_and_grad(const PooledBatch& batch, const ProjectionHead& head, const ScoringConfig& cfg);
LossAndGrad infonce_loss_and_grad(const TrainingBatch& batch, const ProjectionHead& head,
                                  const ScoringConfig& cfg);

}  // namespace mmcoir
