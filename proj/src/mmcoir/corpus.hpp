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
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmcoir {

/// Literal marker for an image slot inside text fields and serializations.
inline constexpr std::string_view kImageToken = "[image]";

enum class Modality : std::uint8_t { kText = 1, kCode = 2, kImage = 4 };

class ModalityMask {
 public:
  constexpr ModalityMask() = default;
  constexpr explicit ModalityMask(std::uint8_t bits) : bits_(bits & 7U) {}

  constexpr bool has(Modality m) const noexcept {
    return (bits_ & static_cast<std::uint8_t>(m)) != 0;
  }
  constexpr ModalityMask with(Modality m) const noexcept {
    return ModalityMask(static_cast<std::uint8_t>(bits_ | static_cast<std::uint8_t>(m)));
  }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr std::uint8_t bits() const noexcept { return bits_; }
  int size() const noexcept;

  /// Letters in canonical order: "t", "i", "c" (e.g. "tc", "ic").
  std::string letters() const;

  constexpr bool operator==(const ModalityMask&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

/// One query or candidate payload. Empty strings count as absent, and the
/// modality mask is derived from which fields are present.
struct ModalItem {
  std::optional<std::string> text;
  std::optional<std::string> code;
  std::optional<std::string> image_ref;
  /// Inline image content; takes precedence over reading image_ref from disk.
  std::shared_ptr<const std::string> image_bytes;

  ModalityMask mask() const noexcept;
  bool has_image() const noexcept;
};

struct Instruction {
  std::string template_id;
  std::string text;
};

/// Retrieval direction such as "qi→rc" or "qtc->ric".
struct Direction {
  ModalityMask query;
  ModalityMask target;

  /// Canonical tag using the unicode arrow, e.g. "qtc→ric".
  std::string tag() const;
};

/// Accepts "→" or "->"; query letters from {t,i,c}, target letters from {i,c}
/// (text targets are rejected). Throws Error(kInvalidArgument).
Direction parse_direction(std::string_view tag);

struct TrainingPair {
  std::string qry;
  std::optional<std::string> qry_img_path;
  std::optional<std::string> pos_text;
  std::optional<std::string> pos_img_path;
  std::optional<std::string> neg_text;
  std::optional<std::string> neg_img_path;
  std::size_t row = 0;
  std::string dataset_tag;
  /// Optional direction tag from the ingest options; inferred when empty.
  std::string task_tag;

  bool operator==(const TrainingPair&) const = default;
};

struct EvalPair {
  std::optional<std::string> qry_text;
  std::optional<std::string> qry_img_path;
  std::optional<std::string> tgt_text;
  std::optional<std::string> tgt_img_path;
  std::string task_tag;
  std::string dataset_tag;
  std::size_t row = 0;

  bool operator==(const EvalPair&) const = default;
};

struct RowError {
  std::size_t line_no = 0;  // 1-based
  std::string reason;
};

struct IngestOptions {
  /// Strict (default) aborts on the first malformed row with
  /// Error(kMalformedRow); lenient counts and records rejects instead.
  bool lenient = false;
  std::string dataset_tag;
  std::string task_tag;
};

template <typename Row>
struct IngestResult {
  std::vector<Row> rows;
  std::vector<RowError> rejects;
};

IngestResult<TrainingPair> ingest_train(std::istream& in, const IngestOptions& opts = {});
IngestResult<EvalPair> ingest_eval(std::istream& in, const IngestOptions& opts);

/// Single-row parsers; throw Error(kMalformedRow) with the reason.
TrainingPair parse_train_row(std::string_view line, std::size_t row = 0);
EvalPair parse_eval_row(std::string_view line, std::size_t row = 0);

/// Serialize back to the on-disk schema (all keys present, absent as null).
std::string to_jsonl(const TrainingPair& pair);
std::string to_jsonl(const EvalPair& pair);

/// Byte range of canonical_text contributed by one modality part.
struct Segment {
  Modality modality;
  std::size_t offset;
  std::size_t length;
};

struct SerializedItem {
  std::string canonical_text;
  std::optional<std::string> image_ref;
  std::shared_ptr<const std::string> image_bytes;
  std::size_t token_budget = 0;
  /// Text/code spans inside canonical_text (the instruction counts as text;
  /// the image placeholder is not a segment). Clipped by truncation.
  std::vector<Segment> segments;
};

/// Instruction, then text, then the image placeholder, then code, joined by
/// "\n" and truncated to \p budget units with the prefix kept.
/// Throws Error(kEmptyItem) when the item has no modality and
/// Error(kInvalidArgument) for an empty instruction, zero budget, or a text or
/// code part that itself contains the reserved image token.
SerializedItem compose_query(const ModalItem& item, const Instruction& inst, std::size_t budget);
SerializedItem compose_target(const ModalItem& item, std::size_t budget);

// --- Instruction templates ------------------------------------------------

inline constexpr std::string_view kInstructionTableVersion = "v1";

/// Standard instruction for datasets that carry none. Known directions use
/// fixed strings; any other direction gets a generic rendering.
Instruction standard_instruction(const Direction& dir);

/// Splits a leading "Please retrieve ..." sentence off \p text when present
/// (returning the dataset-provided instruction and the remainder); otherwise
/// returns the standard instruction for \p dir and \p text unchanged.
std::pair<Instruction, std::string> resolve_instruction(std::string_view text, const Direction& dir);

// --- Row to item mapping ----------------------------------------------------

/// A query-side item with its resolved instruction.
struct QuerySpec {
  ModalItem item;
  Instruction instruction;
};

/// Removes every image token and trims.
std::string strip_image_token(std::string_view text);

/// Maps free query text onto text/code parts by direction: text-only
/// directions keep it as text, code-only directions as code, and text+code
/// directions split at the first newline (text before, code after).
QuerySpec make_query(const std::optional<std::string>& text, const std::optional<std::string>& img,
                     const Direction& dir);

/// Target text is always code (targets are images, code, or both).
ModalItem make_target(const std::optional<std::string>& text, const std::optional<std::string>& img);

/// The row's task tag when set, else the direction implied by its populated
/// fields.
Direction infer_train_direction(const TrainingPair& pair);

// --- Length report -----------------------------------------------------------

struct LengthRow {
  std::string dataset_tag;
  std::string split;  // "train" or "eval"
  std::size_t n = 0;
  double query_mean = 0.0;
  std::size_t query_max = 0;
  double target_mean = 0.0;
  std::size_t target_max = 0;
};

/// One row per (dataset, split), sorted by dataset then split.
std::vector<LengthRow> length_report(const std::vector<TrainingPair>& train,
                                     const std::vector<EvalPair>& eval);

std::string length_report_csv(const std::vector<LengthRow>& rows);

}  // namespace mmcoir
