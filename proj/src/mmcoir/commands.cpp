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


#include "mmcoir/commands.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "mmcoir/error.hpp"
#include "mmcoir/hashing.hpp"
#include "mmcoir/io_util.hpp"
#include "mmcoir/synthetic.hpp"
#include "mmcoir/trainer.hpp"

namespace mmcoir {

namespace {

using ojson = nlohmann::ordered_json;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::kIoError, "cannot open " + path.string());
  return in;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

BackendConfig resolved_backend(const EngineConfig& cfg) {
  BackendConfig b = cfg.backend;
  b.image_root = resolve_data_path(cfg, b.image_root);
  if (b.cache_dir) b.cache_dir = resolve_data_path(cfg, *b.cache_dir);
  return b;
}

EvalContext make_context(const EngineConfig& cfg, EmbeddingBackend& backend, const ProjectionHead* head) {
  EvalContext ctx;
  ctx.backend = &backend;
  ctx.head = head;
  ctx.scoring = cfg.scoring;
  ctx.token_budget = cfg.backend.token_budget;
  ctx.image_root = resolved_backend(cfg).image_root;
  ctx.seed = cfg.seed;
  return ctx;
}

std::vector<SuiteEntry> read_manifest(const EngineConfig& cfg, const std::filesystem::path& manifest) {
  const auto path = resolve_data_path(cfg, manifest);
  auto text = try_read_file(path);
  if (!text) raise(ErrorCode::kIoError, "cannot read manifest " + path.string());
  return parse_manifest(*text, path.parent_path());
}

std::string target_key(const SerializedItem& item, const std::filesystem::path& image_root) {
  return DigestBuilder().add(item.canonical_text).add(image_digest(item, image_root).hex()).finish().hex();
}

}  // namespace

IngestSummary cmd_ingest(const EngineConfig& cfg, RowKind kind, const std::filesystem::path& input,
                         const IngestOptions& opts, const std::filesystem::path& out_dir) {
  auto in = open_input(resolve_data_path(cfg, input));
  std::string rows_out;
  std::vector<RowError> rejects;
  IngestSummary s;
  if (kind == RowKind::kTrain) {
    auto r = ingest_train(in, opts);
    for (const auto& p : r.rows) rows_out += to_jsonl(p) + "\n";
    s.rows = r.rows.size();
    rejects = std::move(r.rejects);
  } else {
    auto r = ingest_eval(in, opts);
    for (const auto& p : r.rows) rows_out += to_jsonl(p) + "\n";
    s.rows = r.rows.size();
    rejects = std::move(r.rejects);
  }
  s.rejects = rejects.size();
  s.output = out_dir / (kind == RowKind::kTrain ? "train.jsonl" : "eval.jsonl");
  write_file_atomic(s.output, rows_out);
  std::string rej = "line,reason\n";
  for (const auto& e : rejects) rej += std::to_string(e.line_no) + "," + csv_field(e.reason) + "\n";
  write_file_atomic(out_dir / "rejects.csv", rej);
  return s;
}

std::vector<TrainingPair> load_train_pairs(const EngineConfig& cfg, const std::vector<std::filesystem::path>& files,
                                           const IngestOptions& opts) {
  std::vector<TrainingPair> out;
  for (const auto& f : files) {
    auto in = open_input(resolve_data_path(cfg, f));
    IngestOptions o = opts;
    if (o.dataset_tag.empty()) o.dataset_tag = f.stem().string();
    auto r = ingest_train(in, o);
    out.insert(out.end(), r.rows.begin(), r.rows.end());
  }
  return out;
}

// Evaluation rows carry no direction of their own.
void require_task_tag(const std::string& task_tag) {
  if (task_tag.empty()) raise(ErrorCode::kInvalidArgument, "evaluation rows need a task tag such as qc->rc");
}

std::vector<EvalPair> load_eval_pairs(const EngineConfig& cfg, const std::filesystem::path& file,
                                      const IngestOptions& opts) {
  auto in = open_input(resolve_data_path(cfg, file));
  IngestOptions o = opts;
  if (o.dataset_tag.empty()) o.dataset_tag = file.stem().string();
  return ingest_eval(in, o).rows;
}

void cmd_length_report(const EngineConfig& cfg, const std::vector<std::filesystem::path>& train_files,
                       const std::filesystem::path& eval_file, const std::string& eval_task,
                       const std::filesystem::path& out_dir) {
  const auto train = load_train_pairs(cfg, train_files);
  std::vector<EvalPair> eval;
  if (!eval_file.empty()) eval = load_eval_pairs(cfg, eval_file, IngestOptions{false, "", eval_task});
  write_file_atomic(out_dir / "lengths.csv", length_report_csv(length_report(train, eval)));
}

std::shared_ptr<EmbeddingBackend> open_backend(const EngineConfig& cfg) { return make_backend(resolved_backend(cfg)); }

std::optional<ProjectionHead> open_head(const EngineConfig& cfg, const std::optional<std::filesystem::path>& path) {
  if (!path) return std::nullopt;
  return ProjectionHead::load(resolve_data_path(cfg, *path));
}

std::size_t cmd_embed(const EngineConfig& cfg, RowKind kind, const std::filesystem::path& input,
                      const std::string& task_tag, const std::filesystem::path& out_dir) {
  const std::size_t budget = cfg.backend.token_budget;
  std::vector<SerializedItem> items;
  std::vector<std::pair<std::size_t, const char*>> labels;
  if (kind == RowKind::kTrain) {
    for (const auto& p : load_train_pairs(cfg, {input}, IngestOptions{false, "", task_tag})) {
      const QuerySpec q = make_query(p.qry, p.qry_img_path, infer_train_direction(p));
      items.push_back(compose_query(q.item, q.instruction, budget));
      labels.emplace_back(p.row, "query");
      items.push_back(compose_target(make_target(p.pos_text, p.pos_img_path), budget));
      labels.emplace_back(p.row, "target");
      if (p.neg_text || p.neg_img_path) {
        items.push_back(compose_target(make_target(p.neg_text, p.neg_img_path), budget));
        labels.emplace_back(p.row, "negative");
      }
    }
  } else {
    require_task_tag(task_tag);
    for (const auto& p : load_eval_pairs(cfg, input, IngestOptions{false, "", task_tag})) {
      items.push_back(eval_query_item(p, budget));
      labels.emplace_back(p.row, "query");
      items.push_back(eval_target_item(p, budget));
      labels.emplace_back(p.row, "target");
    }
  }
  auto backend = open_backend(cfg);
  const auto vecs = embed_all(*backend, items, std::max<std::size_t>(1, cfg.backend.batch_size));
  std::string out;
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    ojson j;
    j["row"] = labels[i].first;
    j["side"] = labels[i].second;
    j["backend"] = vecs[i].backend_id;
    j["values"] = vecs[i].values;
    out += j.dump() + "\n";
  }
  write_file_atomic(out_dir / "embeddings.jsonl", out);
  return vecs.size();
}

TrainSummary cmd_train(const EngineConfig& cfg, const std::vector<std::filesystem::path>& train_files,
                       const IngestOptions& train_opts, const std::filesystem::path& out_dir) {
  const auto pairs = load_train_pairs(cfg, train_files, train_opts);
  auto backend = open_backend(cfg);
  const std::size_t dim = backend->dim();
  ProjectionHead init = ProjectionHead::identity_init(dim, cfg.head.d_out ? cfg.head.d_out : dim, cfg.head.shared,
                                                      cfg.head.bias, cfg.seed);
  TrainerConfig tc = cfg.trainer;
  tc.seed = cfg.seed;
  tc.token_budget = cfg.backend.token_budget;
  if (tc.checkpoint_every > 0) tc.checkpoint_dir = out_dir / "checkpoints";
  TrainResult r = train(pairs, *backend, std::move(init), tc, cfg.scoring);

  TrainSummary s;
  s.steps = r.loss_curve.size();
  s.final_loss = r.loss_curve.empty() ? 0.0 : r.loss_curve.back();
  s.head_fingerprint = r.head.fingerprint();
  s.head_path = out_dir / "head.bin";
  r.head.save(s.head_path);
  write_file_atomic(out_dir / "loss.csv", loss_curve_csv(r.loss_curve));
  return s;
}

VectorIndex build_target_index(const EngineConfig& cfg, RowKind kind, const std::filesystem::path& input,
                               const std::string& corpus_tag, const std::string& task_tag,
                               const ProjectionHead* head) {
  const std::size_t budget = cfg.backend.token_budget;
  const auto image_root = resolved_backend(cfg).image_root;
  std::vector<SerializedItem> items;
  std::vector<ItemId> ids;
  std::vector<PayloadRef> refs;
  std::unordered_set<std::string> seen;
  auto add = [&](SerializedItem item, std::size_t row, ModalityMask mask) {
    if (!seen.insert(target_key(item, image_root)).second) return;
    items.push_back(std::move(item));
    ids.push_back(row);
    refs.push_back(PayloadRef{corpus_tag, row, mask});
  };
  if (kind == RowKind::kTrain) {
    for (const auto& p : load_train_pairs(cfg, {input}, IngestOptions{false, corpus_tag, task_tag})) {
      const ModalItem t = make_target(p.pos_text, p.pos_img_path);
      add(compose_target(t, budget), p.row, t.mask());
    }
  } else {
    require_task_tag(task_tag);
    for (const auto& p : load_eval_pairs(cfg, input, IngestOptions{false, corpus_tag, task_tag})) {
      add(eval_target_item(p, budget), p.row, make_target(p.tgt_text, p.tgt_img_path).mask());
    }
  }
  if (items.empty()) raise(ErrorCode::kEmptyCorpus, "no targets in " + input.string());
  auto backend = open_backend(cfg);
  auto vecs = embed_all(*backend, items);
  if (head) vecs = head->project_all(Side::kTarget, vecs);
  return VectorIndex::build(vecs, ids, refs);
}

std::size_t cmd_index(const EngineConfig& cfg, RowKind kind, const std::filesystem::path& input,
                      const std::string& corpus_tag, const std::string& task_tag,
                      const std::optional<std::filesystem::path>& head_path, const std::filesystem::path& out_path) {
  const auto head = open_head(cfg, head_path);
  const VectorIndex index = build_target_index(cfg, kind, input, corpus_tag, task_tag, head ? &*head : nullptr);
  index.save(out_path);
  return index.size();
}

std::shared_ptr<const ServiceState> load_service_state(
    const EngineConfig& cfg, const std::vector<std::pair<std::string, std::filesystem::path>>& corpora,
    const std::optional<std::filesystem::path>& head_path) {
  auto state = std::make_shared<ServiceState>();
  state->backend = open_backend(cfg);
  state->head = open_head(cfg, head_path);
  state->token_budget = cfg.backend.token_budget;
  for (const auto& [tag, path] : corpora) {
    if (!state->corpora.emplace(tag, VectorIndex::load(resolve_data_path(cfg, path))).second) {
      raise(ErrorCode::kConfigError, "corpus tag '" + tag + "' given twice");
    }
  }
  return state;
}

std::string cmd_search(const EngineConfig& cfg, const std::filesystem::path& index_path,
                       const std::optional<std::filesystem::path>& head_path, const SearchRequest& req) {
  auto state = load_service_state(cfg, {{req.corpus, index_path}}, head_path);
  const RetrievalService service(state);
  return search_response_json(service.search(req), state->corpora.at(req.corpus));
}

SuiteReport cmd_eval(const EngineConfig& cfg, const std::filesystem::path& manifest,
                     const std::optional<std::filesystem::path>& head_path, const std::filesystem::path& out_dir) {
  const auto entries = read_manifest(cfg, manifest);
  auto backend = open_backend(cfg);
  const auto head = open_head(cfg, head_path);
  const EvalContext ctx = make_context(cfg, *backend, head ? &*head : nullptr);
  SuiteReport suite = evaluate_suite(entries, ctx, cfg.pools);
  write_file_atomic(out_dir / "report.csv", suite_csv(suite));
  write_file_atomic(out_dir / "report.json", suite_json(suite));
  return suite;
}

std::vector<MetricsReport> cmd_ablate_len(const EngineConfig& cfg, const std::filesystem::path& manifest,
                                          const std::optional<std::filesystem::path>& head_path,
                                          const std::filesystem::path& out_dir) {
  const auto entries = read_manifest(cfg, manifest);
  auto backend = open_backend(cfg);
  const auto head = open_head(cfg, head_path);
  const EvalContext ctx = make_context(cfg, *backend, head ? &*head : nullptr);
  std::vector<MetricsReport> rows;
  for (const auto& e : entries) {
    const auto pairs = load_eval_pairs(cfg, e.file, IngestOptions{false, e.dataset_tag, e.task_tag});
    if (pairs.empty()) raise(ErrorCode::kInvalidArgument, "no evaluation pairs in " + e.file.string());
    for (auto r : length_ablation(pairs, ctx, cfg.budgets)) {
      r.dataset_tag = e.dataset_tag;
      r.task_tag = e.task_tag;
      rows.push_back(std::move(r));
    }
  }
  write_file_atomic(out_dir / "ablation.csv", ablation_csv(rows));
  return rows;
}

RagSummary cmd_rag(const EngineConfig& cfg, const std::vector<std::filesystem::path>& train_files,
                   const IngestOptions& train_opts, const std::filesystem::path& eval_file, const std::string& eval_task,
                   const std::optional<std::filesystem::path>& head_path, const std::filesystem::path& out_dir,
                   const std::optional<GenerationConfig>& generation) {
  const auto train = load_train_pairs(cfg, train_files, train_opts);
  const auto eval = load_eval_pairs(cfg, eval_file, IngestOptions{false, "", eval_task});
  auto backend = open_backend(cfg);
  const auto head = open_head(cfg, head_path);
  RagConfig rc = cfg.rag;
  rc.token_budget = cfg.backend.token_budget;
  const CodeCorpus corpus = CodeCorpus::build(rc.corpus_tag, CodeCorpus::codes_from_pairs(train), *backend,
                                              head ? &*head : nullptr, rc.token_budget);
  const auto records = build_rag_prompts(eval, corpus, rc, *backend, head ? &*head : nullptr);

  RagSummary s;
  s.prompts = records.size();
  s.guard_violations = guard_audit(records, rc.guard, rc.max_exemplar_units).size();
  std::string prompts, log;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    ojson j;
    j["query_ref"] = r.prompt.query_ref;
    j["prompt_hash"] = prompt_hash(r.prompt);
    j["exemplars"] = ojson::array();
    for (const auto& e : r.prompt.exemplars) j["exemplars"].push_back({{"id", e.id}, {"score", e.score}});
    j["rendered"] = r.prompt.rendered;
    prompts += j.dump() + "\n";

    std::string output_path;
    if (generation) {
      std::optional<std::string> image;
      if (r.image_path) image = (resolved_backend(cfg).image_root / *r.image_path).string();
      const Generation g = generate(r.prompt, image, *generation);
      output_path = "outputs/" + std::to_string(i) + ".txt";
      write_file_atomic(out_dir / output_path, g.text);
      ojson meta;
      meta["model"] = g.model;
      meta["prompt_hash"] = g.prompt_hash;
      meta["timestamp"] = g.timestamp;
      write_file_atomic(out_dir / ("outputs/" + std::to_string(i) + ".meta.json"), meta.dump() + "\n");
      ++s.generations;
    }
    log += run_log_line(r, output_path);
  }
  write_file_atomic(out_dir / "prompts.jsonl", prompts);
  write_file_atomic(out_dir / "run_log.jsonl", log);
  write_file_atomic(out_dir / "no_rag_prompt.txt", no_rag_prompt(rc.prompt_template_id));
  return s;
}

void cmd_gen_fixtures(const std::string& kind, const std::filesystem::path& out_dir,
                      std::optional<std::uint64_t> seed) {
  ojson manifest = ojson::array();
  if (kind == "planted-feature") {
    PlantedFeatureOptions o;
    if (seed) o.seed = *seed;
    const SyntheticData d = planted_feature_dataset(o);
    std::string train, eval;
    for (const auto& p : d.train) train += to_jsonl(p) + "\n";
    for (const auto& p : d.eval) eval += to_jsonl(p) + "\n";
    write_file_atomic(out_dir / "train.jsonl", train);
    write_file_atomic(out_dir / "eval.jsonl", eval);
    manifest.push_back({{"dataset", "planted-feature"}, {"task", d.eval.front().task_tag}, {"file", "eval.jsonl"}});
  } else if (kind == "planted-position") {
    PlantedPositionOptions o;
    if (seed) o.seed = *seed;
    const auto pairs = planted_position_dataset(o);
    std::string eval;
    for (const auto& p : pairs) eval += to_jsonl(p) + "\n";
    write_file_atomic(out_dir / "eval.jsonl", eval);
    manifest.push_back({{"dataset", "planted-position"}, {"task", pairs.front().task_tag}, {"file", "eval.jsonl"}});
  } else {
    raise(ErrorCode::kInvalidArgument, "unknown fixture kind '" + kind + "' (planted-feature, planted-position)");
  }
  write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace mmcoir
