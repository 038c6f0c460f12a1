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
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mmcoir/corpus.hpp"
#include "mmcoir/embedder.hpp"
#include "mmcoir/infonce.hpp"
#include "mmcoir/metrics.hpp"
#include "mmcoir/projection_head.hpp"

namespace mmcoir {

struct MetricsReport {
  std::string dataset_tag;
  std::string task_tag;
  std::size_t n_queries = 0;
  std::size_t token_budget = 0;
  std::map<std::size_t, double> hit_at;
  std::map<std::size_t, double> ndcg_at;
  std::map<std::size_t, double> recall_at;
  double mrr = 0.0;
  std::string config_fingerprint;
  /// Rank of each query's own target, in input order.
  std::vector<Rank> ranks;
};

inline constexpr std::size_t kReportCutoffs[] = {1, 5, 10};

enum class PoolMode { kPerTask, kMerged };

struct EvalContext {
  EmbeddingBackend* backend = nullptr;
  /// No head means raw backend vectors are compared directly.
  const ProjectionHead* head = nullptr;
  ScoringConfig scoring;
  std::size_t token_budget = 256;
  /// Root for relative image paths, used for target dedup digests.
  std::filesystem::path image_root;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
};

/// Fingerprint of everything that determines a report's numbers.
std::string config_fingerprint(const EvalContext& ctx);

/// Averages per-query ranks into a report (cutoffs 1, 5, 10).
MetricsReport summarize(std::span<const Rank> ranks);

SerializedItem eval_query_item(const EvalPair& pair, std::size_t budget);
SerializedItem eval_target_item(const EvalPair& pair, std::size_t budget);

/// Ranks each pair's own target within the deduplicated targets of
/// \p pool_pairs, which must include every target of \p pairs. Ties follow
/// the index rule (score descending, then pool id ascending).
MetricsReport evaluate_against(std::span<const EvalPair> pairs, std::span<const EvalPair> pool_pairs,
                               const EvalContext& ctx);

/// Pool = this task's own distinct targets.
MetricsReport evaluate_task(std::span<const EvalPair> pairs, const EvalContext& ctx);

struct SuiteEntry {
  std::string dataset_tag;
  std::string task_tag;
  std::filesystem::path file;
};

struct SuiteReport {
  std::vector<MetricsReport> rows;
  /// Unweighted mean over rows; n_queries is the total.
  MetricsReport macro;
};

/// Parses a manifest: a JSON array of {"dataset", "task", "file"} objects.
/// Relative files resolve against \p base.
std::vector<SuiteEntry> parse_manifest(std::string_view json, const std::filesystem::path& base);

/// Throws Error(kIoError) naming the first manifest row whose file is
/// missing, before any evaluation starts.
SuiteReport evaluate_suite(std::span<const SuiteEntry> manifest, const EvalContext& ctx,
                           PoolMode pools = PoolMode::kPerTask);

MetricsReport macro_average(std::span<const MetricsReport> rows);

/// dataset,task,n,hit@1,hit@5,hit@10,ndcg@10,mrr,recall@10,fingerprint
std::string report_csv(std::span<const MetricsReport> rows);
std::string suite_csv(const SuiteReport& suite);
/// Same values as the CSV, as JSON.
std::string suite_json(const SuiteReport& suite);

/// One evaluate_task per budget, in the given order. Throws
/// Error(kInvalidArgument) for an empty budget list.
std::vector<MetricsReport> length_ablation(std::span<const EvalPair> pairs, const EvalContext& ctx,
                                           std::span<const std::size_t> budgets);

/// budget,dataset,task,n,hit@1,hit@5,hit@10,ndcg@10,mrr,recall@10,fingerprint
std::string ablation_csv(std::span<const MetricsReport> rows);

}  // namespace mmcoir
