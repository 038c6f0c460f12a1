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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "mmcoir/corpus.hpp"
#include "mmcoir/embedder.hpp"
#include "mmcoir/infonce.hpp"
#include "mmcoir/projection_head.hpp"
#include "mmcoir/vector_index.hpp"

namespace mmcoir {

enum class OptimizerKind { kAdam, kSgd };
enum class ScheduleKind { kLinear };

struct TrainerConfig {
  double learning_rate = 5e-5;
  std::size_t warmup_steps = 100;
  std::size_t total_steps = 1000;
  ScheduleKind schedule = ScheduleKind::kLinear;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Mined hard negatives per row, refreshed once per epoch. 0 disables.
  std::size_t hard_negatives = 8;
  /// Write head-step<N>.bin every this many steps when checkpoint_dir is set.
  std::size_t checkpoint_every = 0;
  std::optional<std::filesystem::path> checkpoint_dir;
  std::size_t token_budget = 256;

  /// Throws Error(kConfigError).
  void validate() const;
};

/// Learning rate applied at 0-based step \p step: linear warmup from 0 to the
/// peak, then linear decay to 0 at total_steps.
double scheduled_lr(const TrainerConfig& cfg, std::size_t step);

/// Backend embeddings of training pairs. Rows sharing one target content
/// share one group id; mining never returns a row's own group.
struct EmbeddedPairs {
  std::vector<EmbeddingVector> queries;
  std::vector<EmbeddingVector> positives;
  std::vector<std::optional<EmbeddingVector>> negatives;
  std::vector<std::size_t> target_group;
};

/// Serializes (instructions included) and embeds every pair.
EmbeddedPairs embed_training_pairs(std::span<const TrainingPair> pairs, EmbeddingBackend& backend,
                                   std::size_t token_budget);

/// Top-k corpus ids per projected query, skipping that query's exclusion set.
/// Short lists are allowed; k == 0 gives empty lists.
std::vector<std::vector<ItemId>> mine_hard_negatives(std::span<const EmbeddingVector> queries,
                                                     const VectorIndex& corpus, std::size_t k,
                                                     std::span<const std::unordered_set<ItemId>> exclusion);

struct TrainResult {
  ProjectionHead head;
  /// Loss at each step, in order.
  std::vector<double> loss_curve;
};

/// Called after every optimizer step with the 1-based step count.
using StepHook = std::function<void(std::size_t step, const ProjectionHead& head, double loss)>;

/// Runs the contrastive loop from \p head_init. Deterministic given cfg.seed.
/// Throws Error(kNonFiniteLoss) naming the step, Error(kInvalidArgument) for
/// fewer than two pairs.
TrainResult train_embedded(const EmbeddedPairs& data, ProjectionHead head_init, const TrainerConfig& cfg,
                           const ScoringConfig& scoring, const StepHook& hook = {});

TrainResult train(std::span<const TrainingPair> pairs, EmbeddingBackend& backend, ProjectionHead head_init,
                  const TrainerConfig& cfg, const ScoringConfig& scoring, const StepHook& hook = {});

/// "step,loss" with 1-based steps and %.17g losses.
std::string loss_curve_csv(std::span<const double> curve);

}  // namespace mmcoir
