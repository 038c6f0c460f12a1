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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmcoir/corpus.hpp"
#include "mmcoir/embedder.hpp"
#include "mmcoir/http_transport.hpp"
#include "mmcoir/projection_head.hpp"
#include "mmcoir/vector_index.hpp"

namespace mmcoir {

enum class GuardKind { kStringIdentity, kContentHash };

struct RagConfig {
  std::size_t k = 1;
  std::string corpus_tag = "train-code";
  GuardKind guard = GuardKind::kContentHash;
  std::string prompt_template_id = "chart-v1";
  std::size_t max_exemplar_units = 512;
  std::size_t token_budget = 256;

  /// Throws Error(kConfigError).
  void validate() const;
};

/// True when \p a and \p b count as the same code under \p guard. The
/// content-hash guard compares whitespace-normalized text.
bool guard_equal(GuardKind guard, std::string_view a, std::string_view b);

/// Indexed training-split code snippets; ids are positions.
class CodeCorpus {
 public:
  /// Throws Error(kEmptyCorpus) when \p codes is empty.
  static CodeCorpus build(std::string tag, std::vector<std::string> codes, EmbeddingBackend& backend,
                          const ProjectionHead* head, std::size_t token_budget);
  /// Distinct target code of the training pairs, in first-appearance order.
  static std::vector<std::string> codes_from_pairs(std::span<const TrainingPair> pairs);

  const std::string& tag() const noexcept { return tag_; }
  std::size_t size() const noexcept { return codes_.size(); }
  const std::string& code(ItemId id) const { return codes_.at(static_cast<std::size_t>(id)); }
  const VectorIndex& index() const noexcept { return index_; }

 private:
  std::string tag_;
  std::vector<std::string> codes_;
  VectorIndex index_;
};

struct Exemplar {
  ItemId id = 0;
  std::string code;
  double score = 0.0;
};

/// Query for code retrieval: the item's own instruction when its text starts
/// with one, else the standard one for (item modalities -> code).
QuerySpec rag_query(const std::optional<std::string>& text, const std::optional<std::string>& img);

/// Top-k corpus code for the query. Items equal to \p guard_target under the
/// configured guard are dropped and backfilled from lower ranks. When k is at
/// least the corpus size every surviving item is returned; otherwise fewer
/// than k survivors raise Error(kGuardExhausted).
std::vector<Exemplar> retrieve_exemplars(const QuerySpec& query, const CodeCorpus& corpus, const RagConfig& cfg,
                                         EmbeddingBackend& backend, const ProjectionHead* head,
                                         const std::optional<std::string>& guard_target = std::nullopt);

struct PromptTemplate {
  std::string id;
  std::string instruction;
  std::string request;
  bool allows_zero_exemplars = true;
};

/// Throws Error(kTemplateUnknown).
const PromptTemplate& prompt_template(std::string_view id);
std::vector<std::string> template_ids();

struct AugmentedPrompt {
  std::string query_ref;
  std::vector<Exemplar> exemplars;
  std::string rendered;
};

/// Instruction, then each exemplar fenced under "Reference implementation i"
/// and cut to max_units, then the image placeholder and the request.
AugmentedPrompt build_prompt(std::string query_ref, std::vector<Exemplar> exemplars, std::string_view template_id,
                             std::size_t max_units);

/// The prompt with no exemplars at all.
std::string no_rag_prompt(std::string_view template_id);

/// Body of the first fenced block, or the text unchanged when it has none.
std::string extract_fenced(std::string_view text);

struct GenerationConfig {
  std::string endpoint;
  std::string model = "default";
  std::size_t max_new_tokens = 1024;
  bool extract_fence = false;
  RetryPolicy retry;
};

struct Generation {
  std::string text;
  std::string model;
  std::string prompt_hash;
  std::string timestamp;  // UTC, ISO 8601
};

std::string prompt_hash(const AugmentedPrompt& prompt);

/// Sends the prompt over the generation transport. Throws
/// Error(kTransportError) once retries run out, Error(kProtocolError) for a
/// malformed response, Error(kEmptyGeneration) for blank output.
Generation generate(const AugmentedPrompt& prompt, const std::optional<std::string>& image_path,
                    const GenerationConfig& cfg);

struct RagRecord {
  AugmentedPrompt prompt;
  std::optional<std::string> target_code;
  std::optional<std::string> image_path;
};

/// One guarded prompt per evaluation pair; the pair's target code is the
/// guard target. query_ref is "<dataset>:<row>".
std::vector<RagRecord> build_rag_prompts(std::span<const EvalPair> pairs, const CodeCorpus& corpus,
                                         const RagConfig& cfg, EmbeddingBackend& backend,
                                         const ProjectionHead* head);

/// Prompts that contain their own target: an exemplar guard-equal to it, or
/// a fenced block identical to the target's rendering. Returns offending
/// query refs.
std::vector<std::string> guard_audit(std::span<const RagRecord> records, GuardKind guard, std::size_t max_units);

/// One JSON line per record: query_ref, prompt_hash, exemplar_ids, output_path.
std::string run_log_line(const RagRecord& record, const std::string& output_path);

}  // namespace mmcoir
