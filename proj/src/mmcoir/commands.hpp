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
#include <optional>
#include <string>
#include <vector>

#include "mmcoir/engine_config.hpp"
#include "mmcoir/evaluation.hpp"
#include "mmcoir/rag.hpp"
#include "mmcoir/service.hpp"
#include "mmcoir/vector_index.hpp"

namespace mmcoir {

// File-level operations behind each CLI subcommand. Outputs go to the given
// directory; relative inputs resolve against cfg.data_root.

enum class RowKind { kTrain, kEval };

struct IngestSummary {
  std::size_t rows = 0;
  std::size_t rejects = 0;
  std::filesystem::path output;
};

/// Validates a pair file and writes the normalized rows to
/// out_dir/<kind>.jsonl and rejects to out_dir/rejects.csv.
IngestSummary cmd_ingest(const EngineConfig& cfg, RowKind kind, const std::filesystem::path& input,
                         const IngestOptions& opts, const std::filesystem::path& out_dir);

std::vector<TrainingPair> load_train_pairs(const EngineConfig& cfg, const std::vector<std::filesystem::path>& files,
                                           const IngestOptions& opts = {});
std::vector<EvalPair> load_eval_pairs(const EngineConfig& cfg, const std::filesystem::path& file,
                                      const IngestOptions& opts);

/// Writes out_dir/lengths.csv for the given files (either may be empty).
void cmd_length_report(const EngineConfig& cfg, const std::vector<std::filesystem::path>& train_files,
                       const std::filesystem::path& eval_file, const std::string& eval_task,
                       const std::filesystem::path& out_dir);

std::shared_ptr<EmbeddingBackend> open_backend(const EngineConfig& cfg);
std::optional<ProjectionHead> open_head(const EngineConfig& cfg, const std::optional<std::filesystem::path>& path);

/// Embeds every query and target of a pair file into out_dir/embeddings.jsonl
/// ({"row","side","backend","values"} per line). Returns the line count.
std::size_t cmd_embed(const EngineConfig& cfg, RowKind kind, const std::filesystem::path& input,
                      const std::string& task_tag, const std::filesystem::path& out_dir);

struct TrainSummary {
  std::size_t steps = 0;
  double final_loss = 0.0;
  std::string head_fingerprint;
  std::filesystem::path head_path;
};

/// Trains a head on the concatenated files; writes head.bin, loss.csv, and
/// checkpoints/ under out_dir.
TrainSummary cmd_train(const EngineConfig& cfg, const std::vector<std::filesystem::path>& train_files,
                       const IngestOptions& train_opts, const std::filesystem::path& out_dir);

/// Indexes the distinct targets of a pair file (ids are source rows). With a
/// head, rows are projected by its target side.
VectorIndex build_target_index(const EngineConfig& cfg, RowKind kind, const std::filesystem::path& input,
                               const std::string& corpus_tag, const std::string& task_tag,
                               const ProjectionHead* head);

/// build_target_index, saved to out_path.
std::size_t cmd_index(const EngineConfig& cfg, RowKind kind, const std::filesystem::path& input,
                      const std::string& corpus_tag, const std::string& task_tag,
                      const std::optional<std::filesystem::path>& head_path, const std::filesystem::path& out_path);

/// Top-k over a saved index; the response matches the service's.
std::string cmd_search(const EngineConfig& cfg, const std::filesystem::path& index_path,
                       const std::optional<std::filesystem::path>& head_path, const SearchRequest& req);

/// Runs the manifest; writes report.csv and report.json under out_dir.
SuiteReport cmd_eval(const EngineConfig& cfg, const std::filesystem::path& manifest,
                     const std::optional<std::filesystem::path>& head_path, const std::filesystem::path& out_dir);

/// cfg.budgets for every manifest row; writes ablation.csv under out_dir.
std::vector<MetricsReport> cmd_ablate_len(const EngineConfig& cfg, const std::filesystem::path& manifest,
                                          const std::optional<std::filesystem::path>& head_path,
                                          const std::filesystem::path& out_dir);

struct RagSummary {
  std::size_t prompts = 0;
  std::size_t generations = 0;
  std::size_t guard_violations = 0;
};

/// Builds guarded prompts for every evaluation pair from the training code
/// corpus; writes prompts.jsonl, run_log.jsonl, no_rag_prompt.txt, and
/// (with an endpoint) outputs/<n>.txt under out_dir.
RagSummary cmd_rag(const EngineConfig& cfg, const std::vector<std::filesystem::path>& train_files,
                   const IngestOptions& train_opts, const std::filesystem::path& eval_file, const std::string& eval_task,
                   const std::optional<std::filesystem::path>& head_path, const std::filesystem::path& out_dir,
                   const std::optional<GenerationConfig>& generation);

/// Loads tagged index files and the head into an immutable service state.
std::shared_ptr<const ServiceState> load_service_state(
    const EngineConfig& cfg, const std::vector<std::pair<std::string, std::filesystem::path>>& corpora,
    const std::optional<std::filesystem::path>& head_path);

/// Writes synthetic fixtures: "planted-feature" (train.jsonl, eval.jsonl,
/// manifest.json) or "planted-position" (eval.jsonl, manifest.json). The
/// task tag is recorded in the manifest; planted-feature training rows need
/// it passed at train time. Without a seed each kind uses its default.
void cmd_gen_fixtures(const std::string& kind, const std::filesystem::path& out_dir,
                      std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace mmcoir
