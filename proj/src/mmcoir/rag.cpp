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


#include "mmcoir/rag.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "mmcoir/error.hpp"
#include "mmcoir/hashing.hpp"
#include "mmcoir/text_units.hpp"

namespace mmcoir {

void RagConfig::validate() const {
  if (k < 1) raise(ErrorCode::kConfigError, "rag k must be at least 1");
  if (max_exemplar_units < 1) raise(ErrorCode::kConfigError, "max_exemplar_units must be positive");
  if (token_budget < 1) raise(ErrorCode::kConfigError, "token_budget must be positive");
  if (corpus_tag.empty()) raise(ErrorCode::kConfigError, "corpus_tag must be set");
}

bool guard_equal(GuardKind guard, std::string_view a, std::string_view b) {
  if (guard == GuardKind::kStringIdentity) return a == b;
  return content_digest(normalize_whitespace(a)) == content_digest(normalize_whitespace(b));
}

CodeCorpus CodeCorpus::build(std::string tag, std::vector<std::string> codes, EmbeddingBackend& backend,
                             const ProjectionHead* head, std::size_t token_budget) {
  if (codes.empty()) raise(ErrorCode::kEmptyCorpus, "code corpus '" + tag + "' is empty");
  std::vector<SerializedItem> items;
  items.reserve(codes.size());
  for (const auto& c : codes) {
    ModalItem item;
    item.code = c;
    items.push_back(compose_target(item, token_budget));
  }
  auto vecs = embed_all(backend, items);
  if (head) vecs = head->project_all(Side::kTarget, vecs);
  std::vector<ItemId> ids(codes.size());
  std::vector<PayloadRef> refs(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    ids[i] = i;
    refs[i] = PayloadRef{tag, i, ModalityMask().with(Modality::kCode)};
  }
  CodeCorpus c;
  c.index_ = VectorIndex::build(vecs, ids, refs);
  c.tag_ = std::move(tag);
  c.codes_ = std::move(codes);
  return c;
}

std::vector<std::string> CodeCorpus::codes_from_pairs(std::span<const TrainingPair> pairs) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& p : pairs) {
    const ModalItem t = make_target(p.pos_text, p.pos_img_path);
    if (!t.code || t.code->empty()) continue;
    if (seen.insert(*t.code).second) out.push_back(*t.code);
  }
  return out;
}

QuerySpec rag_query(const std::optional<std::string>& text, const std::optional<std::string>& img) {
  ModalityMask q;
  if (text && !trim(strip_image_token(*text)).empty()) q = q.with(Modality::kText);
  if (img) q = q.with(Modality::kImage);
  if (q.empty()) raise(ErrorCode::kEmptyItem, "rag query has neither text nor image");
  return make_query(text, img, Direction{q, ModalityMask().with(Modality::kCode)});
}

std::vector<Exemplar> retrieve_exemplars(const QuerySpec& query, const CodeCorpus& corpus, const RagConfig& cfg,
                                         EmbeddingBackend& backend, const ProjectionHead* head,
                                         const std::optional<std::string>& guard_target) {
  cfg.validate();
  if (corpus.size() == 0) raise(ErrorCode::kEmptyCorpus, "code corpus '" + corpus.tag() + "' is empty");
  const SerializedItem item = compose_query(query.item, query.instruction, cfg.token_budget);
  auto vecs = backend.embed(std::span<const SerializedItem>(&item, 1));
  if (head) vecs = head->project_all(Side::kQuery, vecs);

  std::unordered_set<ItemId> exclude;
  if (guard_target) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (guard_equal(cfg.guard, corpus.code(i), *guard_target)) exclude.insert(i);
    }
  }
  const std::size_t want = std::min(cfg.k, corpus.size());
  const auto result = corpus.index().search_topk(vecs.front().values, want, exclude);
  if (cfg.k < corpus.size() && result.hits.size() < cfg.k) {
    raise(ErrorCode::kGuardExhausted, "only " + std::to_string(result.hits.size()) + " of " +
                                          std::to_string(cfg.k) + " exemplars survive the guard");
  }
  std::vector<Exemplar> out;
  for (const Hit& h : result.hits) out.push_back(Exemplar{h.id, corpus.code(h.id), h.score});
  return out;
}

namespace {

const std::vector<PromptTemplate>& templates() {
  static const std::vector<PromptTemplate> table = {
      {"chart-v1", "You are an expert Python developer who writes matplotlib code.",
       "Write Python matplotlib code that reproduces the chart in the image above. Return the complete code in one "
       "fenced block.",
       true},
      {"web-v1", "You are an expert front-end developer who writes HTML and CSS.",
       "Write HTML and CSS that reproduce the web page in the image above. Return the complete code in one fenced "
       "block.",
       true},
      {"code-v1", "You are an expert programmer.",
       "Write code that reproduces the content of the image above. Return the complete code in one fenced block.",
       true},
  };
  return table;
}

std::string fence_for(std::string_view code) {
  std::size_t longest = 0, run = 0;
  for (char c : code) {
    run = c == '`' ? run + 1 : 0;
    longest = std::max(longest, run);
  }
  return std::string(std::max<std::size_t>(3, longest + 1), '`');
}

std::string fenced_block(std::string_view code, std::size_t max_units) {
  const std::string_view cut = truncate_units(code, max_units);
  const std::string fence = fence_for(cut);
  return fence + "\n" + std::string(cut) + "\n" + fence + "\n";
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

const PromptTemplate& prompt_template(std::string_view id) {
  for (const auto& t : templates()) {
    if (t.id == id) return t;
  }
  raise(ErrorCode::kTemplateUnknown, "unknown prompt template '" + std::string(id) + "'");
}

std::vector<std::string> template_ids() {
  std::vector<std::string> out;
  for (const auto& t : templates()) out.push_back(t.id);
  return out;
}

AugmentedPrompt build_prompt(std::string query_ref, std::vector<Exemplar> exemplars, std::string_view template_id,
                             std::size_t max_units) {
  const PromptTemplate& t = prompt_template(template_id);
  if (exemplars.empty() && !t.allows_zero_exemplars) {
    raise(ErrorCode::kInvalidArgument, "template '" + t.id + "' needs at least one exemplar");
  }
  if (max_units < 1) raise(ErrorCode::kInvalidArgument, "max exemplar units must be positive");
  std::string r = t.instruction + "\n\n";
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    r += "Reference implementation " + std::to_string(i + 1) + ":\n";
    r += fenced_block(exemplars[i].code, max_units);
    r += "\n";
  }
  r += std::string(kImageToken) + "\n" + t.request + "\n";
  AugmentedPrompt p;
  p.query_ref = std::move(query_ref);
  p.exemplars = std::move(exemplars);
  p.rendered = std::move(r);
  return p;
}

std::string no_rag_prompt(std::string_view template_id) {
  return build_prompt("", {}, template_id, 1).rendered;
}

std::string extract_fenced(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    std::size_t ticks = 0;
    while (ticks < line.size() && line[ticks] == '`') ++ticks;
    if (ticks >= 3 && line.substr(ticks).find('`') == std::string_view::npos) {
      const std::size_t body = std::min(text.size(), eol + 1);
      std::size_t p = body;
      while (p < text.size()) {
        std::size_t e = text.find('\n', p);
        if (e == std::string_view::npos) e = text.size();
        const std::string_view l = text.substr(p, e - p);
        std::size_t n = 0;
        while (n < l.size() && l[n] == '`') ++n;
        if (n >= ticks && trim(l.substr(n)).empty()) {
          std::string_view inner = text.substr(body, p - body);
          if (!inner.empty() && inner.back() == '\n') inner.remove_suffix(1);
          return std::string(inner);
        }
        p = e + 1;
      }
      // Unclosed fence: everything after the opening line.
      return std::string(text.substr(body));
    }
    pos = eol + 1;
  }
  return std::string(text);
}

std::string prompt_hash(const AugmentedPrompt& prompt) { return content_digest(prompt.rendered).hex(); }

Generation generate(const AugmentedPrompt& prompt, const std::optional<std::string>& image_path,
                    const GenerationConfig& cfg) {
  nlohmann::ordered_json req;
  req["model"] = cfg.model;
  req["prompt"] = prompt.rendered;
  req["image_path"] = image_path ? nlohmann::ordered_json(*image_path) : nlohmann::ordered_json(nullptr);
  req["max_new_tokens"] = cfg.max_new_tokens;
  const std::string body = post_json(cfg.endpoint, req.dump(), cfg.retry);

  nlohmann::json resp;
  try {
    resp = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::kProtocolError, std::string("generation response is not JSON: ") + e.what());
  }
  if (!resp.is_object() || !resp.contains("text") || !resp["text"].is_string()) {
    raise(ErrorCode::kProtocolError, "generation response lacks a string 'text' field");
  }
  Generation g;
  g.text = resp["text"].get<std::string>();
  if (cfg.extract_fence) g.text = extract_fenced(g.text);
  if (trim(g.text).empty()) raise(ErrorCode::kEmptyGeneration, "generation for " + prompt.query_ref + " is empty");
  g.model = cfg.model;
  g.prompt_hash = prompt_hash(prompt);
  g.timestamp = utc_now();
  return g;
}

std::vector<RagRecord> build_rag_prompts(std::span<const EvalPair> pairs, const CodeCorpus& corpus,
                                         const RagConfig& cfg, EmbeddingBackend& backend,
                                         const ProjectionHead* head) {
  std::vector<RagRecord> out;
  for (const auto& p : pairs) {
    const QuerySpec q = rag_query(p.qry_text, p.qry_img_path);
    const ModalItem target = make_target(p.tgt_text, p.tgt_img_path);
    RagRecord rec;
    rec.target_code = target.code;
    rec.image_path = p.qry_img_path;
    auto ex = retrieve_exemplars(q, corpus, cfg, backend, head, rec.target_code);
    rec.prompt = build_prompt(p.dataset_tag + ":" + std::to_string(p.row), std::move(ex), cfg.prompt_template_id,
                              cfg.max_exemplar_units);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<std::string> guard_audit(std::span<const RagRecord> records, GuardKind guard, std::size_t max_units) {
  std::vector<std::string> bad;
  for (const auto& r : records) {
    if (!r.target_code) continue;
    bool leaked = false;
    for (const auto& e : r.prompt.exemplars) leaked = leaked || guard_equal(guard, e.code, *r.target_code);
    leaked = leaked || r.prompt.rendered.find(":\n" + fenced_block(*r.target_code, max_units)) != std::string::npos;
    if (leaked) bad.push_back(r.prompt.query_ref);
  }
  return bad;
}

std::string run_log_line(const RagRecord& record, const std::string& output_path) {
  nlohmann::ordered_json j;
  j["query_ref"] = record.prompt.query_ref;
  j["prompt_hash"] = prompt_hash(record.prompt);
  j["exemplar_ids"] = nlohmann::ordered_json::array();
  for (const auto& e : record.prompt.exemplars) j["exemplar_ids"].push_back(e.id);
  j["output_path"] = output_path;
  return j.dump() + "\n";
}

}  // namespace mmcoir
