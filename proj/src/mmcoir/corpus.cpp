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

#include "mmcoir/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <initializer_list>
#include <tuple>

#include <json.hpp>

#include "mmcoir/error.hpp"
#include "mmcoir/text_units.hpp"

namespace mmcoir {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

int ModalityMask::size() const noexcept {
  return static_cast<int>(has(Modality::kText)) + static_cast<int>(has(Modality::kImage)) +
         static_cast<int>(has(Modality::kCode));
}

std::string ModalityMask::letters() const {
  std::string s;
  if (has(Modality::kText)) s += 't';
  if (has(Modality::kImage)) s += 'i';
  if (has(Modality::kCode)) s += 'c';
  return s;
}

bool ModalItem::has_image() const noexcept {
  return image_bytes != nullptr || (image_ref && !image_ref->empty());
}

ModalityMask ModalItem::mask() const noexcept {
  ModalityMask m;
  if (text && !text->empty()) m = m.with(Modality::kText);
  if (code && !code->empty()) m = m.with(Modality::kCode);
  if (has_image()) m = m.with(Modality::kImage);
  return m;
}

std::string Direction::tag() const { return "q" + query.letters() + "→r" + target.letters(); }

namespace {

constexpr std::string_view kArrowUnicode = "→";
constexpr std::string_view kArrowAscii = "->";

ModalityMask parse_letters(std::string_view letters, std::string_view allowed, std::string_view tag) {
  ModalityMask m;
  for (char c : letters) {
    if (allowed.find(c) == std::string_view::npos) {
      raise(ErrorCode::kInvalidArgument, "bad modality letter '" + std::string(1, c) +
                                             "' in direction tag: " + std::string(tag));
    }
    m = m.with(c == 't' ? Modality::kText : c == 'i' ? Modality::kImage : Modality::kCode);
  }
  if (m.empty()) raise(ErrorCode::kInvalidArgument, "empty side in direction tag: " + std::string(tag));
  return m;
}

}  // namespace

Direction parse_direction(std::string_view tag) {
  std::size_t arrow = tag.find(kArrowUnicode);
  std::size_t arrow_len = kArrowUnicode.size();
  if (arrow == std::string_view::npos) {
    arrow = tag.find(kArrowAscii);
    arrow_len = kArrowAscii.size();
  }
  if (arrow == std::string_view::npos) {
    raise(ErrorCode::kInvalidArgument, "direction tag lacks an arrow: " + std::string(tag));
  }
  std::string_view lhs = trim(tag.substr(0, arrow));
  std::string_view rhs = trim(tag.substr(arrow + arrow_len));
  if (lhs.empty() || lhs.front() != 'q' || rhs.empty() || rhs.front() != 'r') {
    raise(ErrorCode::kInvalidArgument, "direction tag must look like q<tic>-><ic>: " + std::string(tag));
  }
  Direction d;
  d.query = parse_letters(lhs.substr(1), "tic", tag);
  d.target = parse_letters(rhs.substr(1), "ic", tag);
  return d;
}

// --- Row parsing -------------------------------------------------------------

namespace {

[[noreturn]] void malformed(const std::string& reason) { raise(ErrorCode::kMalformedRow, reason); }

json parse_object(std::string_view line, std::initializer_list<std::string_view> keys) {
  json j = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) malformed("not valid JSON");
  if (!j.is_object()) malformed("record is not an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) malformed("unknown field '" + key + "'");
    if (!value.is_null() && !value.is_string()) malformed("field '" + key + "' must be a string or null");
  }
  return j;
}

// Absent, null, and "" all mean missing.
std::optional<std::string> field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  std::string s = it->get<std::string>();
  if (s.empty()) return std::nullopt;
  return s;
}

bool has_token(const std::optional<std::string>& s) {
  return s && s->find(kImageToken) != std::string::npos;
}

void check_token_implies_image(const std::optional<std::string>& text, const std::optional<std::string>& img,
                               const char* text_key, const char* img_key) {
  if (has_token(text) && !img) {
    malformed(std::string(text_key) + " contains [image] but " + img_key + " is missing");
  }
}

template <typename T>
void put(ordered_json& j, const char* key, const std::optional<T>& v) {
  if (v) {
    j[key] = *v;
  } else {
    j[key] = nullptr;
  }
}

}  // namespace

TrainingPair parse_train_row(std::string_view line, std::size_t row) {
  const json j = parse_object(line, {"qry", "qry_img_path", "pos_text", "pos_img_path", "neg_text", "neg_img_path"});
  TrainingPair p;
  auto qry = field(j, "qry");
  if (!qry) malformed("qry is missing");
  p.qry = std::move(*qry);
  p.qry_img_path = field(j, "qry_img_path");
  p.pos_text = field(j, "pos_text");
  p.pos_img_path = field(j, "pos_img_path");
  p.neg_text = field(j, "neg_text");
  p.neg_img_path = field(j, "neg_img_path");
  p.row = row;
  if (!p.pos_text && !p.pos_img_path) malformed("both pos_text and pos_img_path are missing");
  const bool token = p.qry.find(kImageToken) != std::string::npos;
  if (token && !p.qry_img_path) malformed("qry contains [image] but qry_img_path is missing");
  if (!token && p.qry_img_path) malformed("qry_img_path is set but qry lacks the [image] token");
  check_token_implies_image(p.pos_text, p.pos_img_path, "pos_text", "pos_img_path");
  check_token_implies_image(p.neg_text, p.neg_img_path, "neg_text", "neg_img_path");
  return p;
}

EvalPair parse_eval_row(std::string_view line, std::size_t row) {
  const json j = parse_object(line, {"qry_text", "qry_img_path", "tgt_text", "tgt_img_path"});
  EvalPair p;
  p.qry_text = field(j, "qry_text");
  p.qry_img_path = field(j, "qry_img_path");
  p.tgt_text = field(j, "tgt_text");
  p.tgt_img_path = field(j, "tgt_img_path");
  p.row = row;
  if (!p.qry_text && !p.qry_img_path) malformed("both qry_text and qry_img_path are missing");
  if (!p.tgt_text && !p.tgt_img_path) malformed("both tgt_text and tgt_img_path are missing");
  check_token_implies_image(p.qry_text, p.qry_img_path, "qry_text", "qry_img_path");
  if (p.qry_text && p.qry_img_path && !has_token(p.qry_text)) {
    malformed("qry_img_path is set but qry_text lacks the [image] token");
  }
  check_token_implies_image(p.tgt_text, p.tgt_img_path, "tgt_text", "tgt_img_path");
  return p;
}

namespace {

template <typename Row, typename Parse>
IngestResult<Row> ingest_lines(std::istream& in, const IngestOptions& opts, Parse parse) {
  IngestResult<Row> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::size_t this_row = row++;
    try {
      out.rows.push_back(parse(line, this_row));
    } catch (const Error& e) {
      if (!opts.lenient) {
        raise(ErrorCode::kMalformedRow, "line " + std::to_string(line_no) + ": " + e.what());
      }
      out.rejects.push_back({line_no, e.what()});
    }
  }
  return out;
}

}  // namespace

IngestResult<TrainingPair> ingest_train(std::istream& in, const IngestOptions& opts) {
  if (!opts.task_tag.empty()) parse_direction(opts.task_tag);
  return ingest_lines<TrainingPair>(in, opts, [&](std::string_view line, std::size_t row) {
    TrainingPair p = parse_train_row(line, row);
    p.dataset_tag = opts.dataset_tag;
    p.task_tag = opts.task_tag;
    return p;
  });
}

IngestResult<EvalPair> ingest_eval(std::istream& in, const IngestOptions& opts) {
  parse_direction(opts.task_tag);
  return ingest_lines<EvalPair>(in, opts, [&](std::string_view line, std::size_t row) {
    EvalPair p = parse_eval_row(line, row);
    p.task_tag = opts.task_tag;
    p.dataset_tag = opts.dataset_tag;
    return p;
  });
}

std::string to_jsonl(const TrainingPair& p) {
  ordered_json j;
  j["qry"] = p.qry;
  put(j, "qry_img_path", p.qry_img_path);
  put(j, "pos_text", p.pos_text);
  put(j, "pos_img_path", p.pos_img_path);
  put(j, "neg_text", p.neg_text);
  put(j, "neg_img_path", p.neg_img_path);
  return j.dump();
}

std::string to_jsonl(const EvalPair& p) {
  ordered_json j;
  put(j, "qry_text", p.qry_text);
  put(j, "qry_img_path", p.qry_img_path);
  put(j, "tgt_text", p.tgt_text);
  put(j, "tgt_img_path", p.tgt_img_path);
  return j.dump();
}

// --- Composition ---------------------------------------------------------------

namespace {

void reject_reserved(const std::optional<std::string>& part, const char* what) {
  if (part && part->find(kImageToken) != std::string::npos) {
    raise(ErrorCode::kInvalidArgument, std::string(what) + " part contains the reserved [image] token");
  }
}

SerializedItem compose(const ModalItem& item, const Instruction* inst, std::size_t budget) {
  if (budget == 0) raise(ErrorCode::kInvalidArgument, "token budget must be positive");
  const ModalityMask mask = item.mask();
  if (mask.empty()) raise(ErrorCode::kEmptyItem, "item has no text, code, or image");
  if (inst) {
    if (inst->text.empty()) raise(ErrorCode::kInvalidArgument, "instruction text is empty");
    if (inst->text.find(kImageToken) != std::string::npos) {
      raise(ErrorCode::kInvalidArgument, "instruction contains the reserved [image] token");
    }
  }
  reject_reserved(item.text, "text");
  reject_reserved(item.code, "code");

  SerializedItem out;
  std::string full;
  std::vector<Segment> segments;
  auto append = [&](std::string_view part, std::optional<Modality> modality) {
    if (!full.empty()) full.push_back('\n');
    if (modality) segments.push_back({*modality, full.size(), part.size()});
    full.append(part);
  };
  if (inst) append(inst->text, Modality::kText);
  if (mask.has(Modality::kText)) append(*item.text, Modality::kText);
  if (mask.has(Modality::kImage)) append(kImageToken, std::nullopt);
  if (mask.has(Modality::kCode)) append(*item.code, Modality::kCode);

  const std::size_t kept = truncate_units(full, budget).size();
  full.resize(kept);
  for (const Segment& s : segments) {
    if (s.offset >= kept) break;
    out.segments.push_back({s.modality, s.offset, std::min(s.length, kept - s.offset)});
  }
  out.canonical_text = std::move(full);
  out.image_ref = item.image_ref;
  out.image_bytes = item.image_bytes;
  out.token_budget = budget;
  return out;
}

}  // namespace

SerializedItem compose_query(const ModalItem& item, const Instruction& inst, std::size_t budget) {
  return compose(item, &inst, budget);
}

SerializedItem compose_target(const ModalItem& item, std::size_t budget) { return compose(item, nullptr, budget); }

// --- Instructions ------------------------------------------------------------------

namespace {

std::string target_noun(ModalityMask t) {
  if (t.has(Modality::kImage) && t.has(Modality::kCode)) return "image and code";
  if (t.has(Modality::kImage)) return "image";
  return "code";
}

std::string query_clause(ModalityMask q) {
  const bool t = q.has(Modality::kText);
  const bool i = q.has(Modality::kImage);
  const bool c = q.has(Modality::kCode);
  if (t && i && c) return "results from applying this instruction to the image and code.";
  if (t && i) return "applies this instruction to the image.";
  if (t && c) return "results from applying this instruction to the code.";
  if (i && c) return "matches this image and code.";
  if (i) return "matches this image.";
  if (c) return "matches this code.";
  return "matches the description.";
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    if (std::tolower(static_cast<unsigned char>(s[k])) != std::tolower(static_cast<unsigned char>(prefix[k]))) {
      return false;
    }
  }
  return true;
}

}  // namespace

Instruction standard_instruction(const Direction& dir) {
  const std::string id = std::string(kInstructionTableVersion) + ":" + dir.tag();
  const std::string q = dir.query.letters();
  const std::string r = dir.target.letters();
  if (q == "i" && r == "c") return {id, "please retrieve the code that matches this image."};
  if (q == "t" && r == "i") return {id, "Please retrieve the image that matches the description."};
  return {id, "Please retrieve the " + target_noun(dir.target) + " that " + query_clause(dir.query)};
}

std::pair<Instruction, std::string> resolve_instruction(std::string_view text, const Direction& dir) {
  std::string_view t = trim(text);
  if (starts_with_ci(t, "please retrieve")) {
    std::size_t end = std::string_view::npos;
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (t[k] == '\n') {
        end = k;
        break;
      }
      if (t[k] == '.' && (k + 1 == t.size() || is_unit_space(t[k + 1]))) {
        end = k + 1;
        break;
      }
    }
    if (end == std::string_view::npos) end = t.size();
    Instruction inst{"dataset", std::string(trim(t.substr(0, end)))};
    // Leading spaces are dropped but a newline directly after the sentence is
    // structural (it separates text from code) and is kept.
    std::string_view rest = t.substr(end);
    while (!rest.empty() && (rest.front() == ' ' || rest.front() == '\t')) rest.remove_prefix(1);
    if (!rest.empty() && rest.front() == '\n' && dir.query.has(Modality::kText) && dir.query.has(Modality::kCode)) {
      // No text part between instruction and code.
      return {inst, std::string(rest)};
    }
    return {inst, std::string(trim(rest))};
  }
  return {standard_instruction(dir), std::string(t)};
}

std::string strip_image_token(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = text.find(kImageToken, pos);
    if (hit == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, hit - pos));
    pos = hit + kImageToken.size();
  }
  return std::string(trim(out));
}

QuerySpec make_query(const std::optional<std::string>& text, const std::optional<std::string>& img,
                     const Direction& dir) {
  QuerySpec spec;
  auto [inst, rest] = resolve_instruction(text ? strip_image_token(*text) : std::string(), dir);
  spec.instruction = std::move(inst);
  if (!rest.empty()) {
    const bool t = dir.query.has(Modality::kText);
    const bool c = dir.query.has(Modality::kCode);
    if (t && c) {
      const std::size_t nl = rest.find('\n');
      if (nl == std::string::npos) {
        spec.item.text = std::string(trim(rest));
      } else {
        auto before = trim(std::string_view(rest).substr(0, nl));
        auto after = trim(std::string_view(rest).substr(nl + 1));
        if (!before.empty()) spec.item.text = std::string(before);
        if (!after.empty()) spec.item.code = std::string(after);
      }
    } else if (c) {
      spec.item.code = std::string(trim(rest));
    } else {
      spec.item.text = std::string(trim(rest));
    }
  }
  if (img && !img->empty()) spec.item.image_ref = *img;
  return spec;
}

ModalItem make_target(const std::optional<std::string>& text, const std::optional<std::string>& img) {
  ModalItem item;
  if (text) {
    std::string code = strip_image_token(*text);
    if (!code.empty()) item.code = std::move(code);
  }
  if (img && !img->empty()) item.image_ref = *img;
  return item;
}

Direction infer_train_direction(const TrainingPair& pair) {
  if (!pair.task_tag.empty()) return parse_direction(pair.task_tag);
  Direction d;
  if (pair.qry_img_path) d.query = d.query.with(Modality::kImage);
  Direction probe{ModalityMask(static_cast<std::uint8_t>(Modality::kText)), ModalityMask(4)};
  if (!resolve_instruction(strip_image_token(pair.qry), probe).second.empty()) {
    d.query = d.query.with(Modality::kText);
  }
  if (pair.pos_text) d.target = d.target.with(Modality::kCode);
  if (pair.pos_img_path) d.target = d.target.with(Modality::kImage);
  if (d.query.empty()) d.query = d.query.with(Modality::kText);
  return d;
}

// --- Length report -------------------------------------------------------------------

std::vector<LengthRow> length_report(const std::vector<TrainingPair>& train, const std::vector<EvalPair>& eval) {
  struct Acc {
    std::size_t n = 0;
    double q_sum = 0.0;
    std::size_t q_max = 0;
    double t_sum = 0.0;
    std::size_t t_max = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> acc;
  auto add = [&](const std::string& ds, const char* split, std::size_t q, std::size_t t) {
    Acc& a = acc[{ds, split}];
    ++a.n;
    a.q_sum += static_cast<double>(q);
    a.q_max = std::max(a.q_max, q);
    a.t_sum += static_cast<double>(t);
    a.t_max = std::max(a.t_max, t);
  };
  for (const auto& p : train) {
    add(p.dataset_tag, "train", count_units(p.qry), p.pos_text ? count_units(*p.pos_text) : 0);
  }
  for (const auto& p : eval) {
    add(p.dataset_tag, "eval", p.qry_text ? count_units(*p.qry_text) : 0, p.tgt_text ? count_units(*p.tgt_text) : 0);
  }
  std::vector<LengthRow> rows;
  for (const auto& [key, a] : acc) {
    LengthRow r;
    r.dataset_tag = key.first;
    r.split = key.second;
    r.n = a.n;
    r.query_mean = a.q_sum / static_cast<double>(a.n);
    r.query_max = a.q_max;
    r.target_mean = a.t_sum / static_cast<double>(a.n);
    r.target_max = a.t_max;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string length_report_csv(const std::vector<LengthRow>& rows) {
  std::string out = "dataset,split,n,query_mean,query_max,target_mean,target_max\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), ",%zu,%.6f,%zu,%.6f,%zu\n", r.n, r.query_mean, r.query_max, r.target_mean,
                  r.target_max);
    out += r.dataset_tag + "," + r.split + buf;
  }
  return out;
}

}  // namespace mmcoir
