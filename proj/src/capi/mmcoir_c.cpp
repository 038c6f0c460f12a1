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


#include "mmcoir.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmcoir/commands.hpp"
#include "mmcoir/engine_config.hpp"
#include "mmcoir/error.hpp"
#include "mmcoir/service.hpp"
#include "mmcoir/vector_index.hpp"

struct mmcoir_engine {
  mmcoir::EngineConfig cfg;
};

struct mmcoir_index {
  mmcoir::VectorIndex index;
};

struct mmcoir_service {
  std::unique_ptr<mmcoir::RetrievalService> service;
};

namespace {

using mmcoir::ErrorCode;

thread_local std::string g_last_error;

template <typename F>
mmcoir_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return MMCOIR_OK;
  } catch (const mmcoir::Error& e) {
    g_last_error = e.one_line();
    return static_cast<mmcoir_status>(e.code());
  } catch (const std::exception& e) {
    g_last_error = mmcoir::Error(ErrorCode::kInternal, e.what()).one_line();
    return MMCOIR_INTERNAL;
  } catch (...) {
    g_last_error = mmcoir::Error(ErrorCode::kInternal, "unknown exception").one_line();
    return MMCOIR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) mmcoir::raise(ErrorCode::kInvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

std::string opt_str(const char* s) { return s ? std::string(s) : std::string(); }

std::optional<std::filesystem::path> opt_path(const char* s) {
  if (!s || !*s) return std::nullopt;
  return std::filesystem::path(s);
}

std::vector<std::filesystem::path> paths(const char* const* files, size_t n) {
  require(files != nullptr || n == 0, "file list is null");
  std::vector<std::filesystem::path> out;
  for (size_t i = 0; i < n; ++i) {
    require(files[i] != nullptr, "file list entry is null");
    out.emplace_back(files[i]);
  }
  return out;
}

mmcoir::RowKind row_kind(mmcoir_row_kind k) {
  require(k == MMCOIR_ROWS_TRAIN || k == MMCOIR_ROWS_EVAL, "unknown row kind");
  return k == MMCOIR_ROWS_TRAIN ? mmcoir::RowKind::kTrain : mmcoir::RowKind::kEval;
}

}  // namespace

extern "C" {

const char* mmcoir_version(void) { return "0.1.0"; }

const char* mmcoir_status_name(mmcoir_status status) {
  if (status < MMCOIR_OK || status > MMCOIR_INTERNAL) return "Unknown";
  return mmcoir::error_name(static_cast<ErrorCode>(status)).data();
}

const char* mmcoir_last_error(void) { return g_last_error.c_str(); }

void mmcoir_string_free(char* s) { std::free(s); }

mmcoir_status mmcoir_engine_create(const char* config_path, int use_env, mmcoir_engine** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    auto e = std::make_unique<mmcoir_engine>();
    if (config_path && *config_path) e->cfg = mmcoir::load_config(config_path);
    if (use_env) mmcoir::apply_env(e->cfg, [](const char* k) { return std::getenv(k); });
    *out = e.release();
  });
}

void mmcoir_engine_destroy(mmcoir_engine* engine) { delete engine; }

namespace {
const mmcoir::EngineConfig& checked(const mmcoir_engine* engine) {
  engine->cfg.validate();
  return engine->cfg;
}
}  // namespace

mmcoir_status mmcoir_engine_set(mmcoir_engine* engine, const char* key, const char* value) {
  return guarded([&] {
    require(engine && key && value, "engine, key, and value are required");
    nlohmann::json doc = nlohmann::json::parse(mmcoir::config_json(engine->cfg));
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
      parsed = std::string(value);
    }
    nlohmann::json* node = &doc;
    std::string k = key;
    std::size_t start = 0;
    while (true) {
      const std::size_t dot = k.find('.', start);
      const std::string part = k.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) mmcoir::raise(ErrorCode::kConfigError, "malformed config key '" + k + "'");
      if (dot == std::string::npos) {
        if (!node->is_object() || !node->contains(part)) {
          mmcoir::raise(ErrorCode::kConfigError, "config field '" + k + "' is not a known field");
        }
        // Strings given for string fields stay strings even when they look like JSON.
        (*node)[part] = (*node)[part].is_string() ? nlohmann::json(std::string(value)) : parsed;
        break;
      }
      if (!node->is_object() || !node->contains(part) || !(*node)[part].is_object()) {
        mmcoir::raise(ErrorCode::kConfigError, "config field '" + k + "' is not a known field");
      }
      node = &(*node)[part];
      start = dot + 1;
    }
    // Semantic checks wait until the config is used, so related fields can be
    // edited one at a time in any order.
    engine->cfg = mmcoir::parse_config(doc.dump());
  });
}

mmcoir_status mmcoir_engine_config_json(const mmcoir_engine* engine, char** out) {
  return guarded([&] {
    require(engine && out, "engine and out are required");
    *out = dup_string(mmcoir::config_json(engine->cfg));
  });
}

mmcoir_status mmcoir_engine_make_run_dir(const mmcoir_engine* engine, char** out_path) {
  return guarded([&] {
    require(engine && out_path, "engine and out_path are required");
    *out_path = dup_string(mmcoir::make_run_dir(checked(engine)).string());
  });
}

mmcoir_status mmcoir_ingest(const mmcoir_engine* engine, mmcoir_row_kind kind, const char* input,
                            const char* dataset_tag, const char* task_tag, int lenient, const char* out_dir,
                            size_t* rows, size_t* rejects) {
  return guarded([&] {
    require(engine && input && out_dir, "engine, input, and out_dir are required");
    mmcoir::IngestOptions o;
    o.lenient = lenient != 0;
    o.dataset_tag = opt_str(dataset_tag);
    o.task_tag = opt_str(task_tag);
    const auto s = mmcoir::cmd_ingest(checked(engine), row_kind(kind), input, o, out_dir);
    if (rows) *rows = s.rows;
    if (rejects) *rejects = s.rejects;
  });
}

mmcoir_status mmcoir_length_report(const mmcoir_engine* engine, const char* const* train_files, size_t n_train,
                                   const char* eval_file, const char* eval_task, const char* out_dir) {
  return guarded([&] {
    require(engine && out_dir, "engine and out_dir are required");
    mmcoir::cmd_length_report(checked(engine), paths(train_files, n_train), opt_str(eval_file), opt_str(eval_task),
                              out_dir);
  });
}

mmcoir_status mmcoir_embed(const mmcoir_engine* engine, mmcoir_row_kind kind, const char* input,
                           const char* task_tag, const char* out_dir, size_t* count) {
  return guarded([&] {
    require(engine && input && out_dir, "engine, input, and out_dir are required");
    const std::size_t n = mmcoir::cmd_embed(checked(engine), row_kind(kind), input, opt_str(task_tag), out_dir);
    if (count) *count = n;
  });
}

mmcoir_status mmcoir_train(const mmcoir_engine* engine, const char* const* train_files, size_t n_files,
                           const char* task_tag, const char* out_dir, char** summary_json) {
  return guarded([&] {
    require(engine && out_dir, "engine and out_dir are required");
    require(n_files > 0, "at least one training file is required");
    mmcoir::IngestOptions o;
    o.task_tag = opt_str(task_tag);
    const auto s = mmcoir::cmd_train(checked(engine), paths(train_files, n_files), o, out_dir);
    if (summary_json) {
      nlohmann::ordered_json j;
      j["steps"] = s.steps;
      j["final_loss"] = s.final_loss;
      j["head_fingerprint"] = s.head_fingerprint;
      j["head_path"] = s.head_path.string();
      *summary_json = dup_string(j.dump());
    }
  });
}

mmcoir_status mmcoir_index_build(const mmcoir_engine* engine, mmcoir_row_kind kind, const char* input,
                                 const char* corpus_tag, const char* task_tag, const char* head_path,
                                 const char* out_path, size_t* count) {
  return guarded([&] {
    require(engine && input && corpus_tag && out_path, "engine, input, corpus_tag, and out_path are required");
    const std::size_t n = mmcoir::cmd_index(checked(engine), row_kind(kind), input, corpus_tag, opt_str(task_tag),
                                            opt_path(head_path), out_path);
    if (count) *count = n;
  });
}

mmcoir_status mmcoir_search(const mmcoir_engine* engine, const char* index_path, const char* head_path,
                            const char* request_json, char** response_json) {
  return guarded([&] {
    require(engine && index_path && request_json && response_json,
            "engine, index_path, request_json, and response_json are required");
    const auto req = mmcoir::parse_search_request(request_json);
    *response_json = dup_string(mmcoir::cmd_search(checked(engine), index_path, opt_path(head_path), req));
  });
}

mmcoir_status mmcoir_eval(const mmcoir_engine* engine, const char* manifest, const char* head_path,
                          const char* out_dir, char** report_csv) {
  return guarded([&] {
    require(engine && manifest && out_dir, "engine, manifest, and out_dir are required");
    const auto suite = mmcoir::cmd_eval(checked(engine), manifest, opt_path(head_path), out_dir);
    if (report_csv) *report_csv = dup_string(mmcoir::suite_csv(suite));
  });
}

mmcoir_status mmcoir_ablate_len(const mmcoir_engine* engine, const char* manifest, const char* head_path,
                                const char* out_dir, char** report_csv) {
  return guarded([&] {
    require(engine && manifest && out_dir, "engine, manifest, and out_dir are required");
    const auto rows = mmcoir::cmd_ablate_len(checked(engine), manifest, opt_path(head_path), out_dir);
    if (report_csv) *report_csv = dup_string(mmcoir::ablation_csv(rows));
  });
}

mmcoir_status mmcoir_rag(const mmcoir_engine* engine, const char* const* train_files, size_t n_train,
                         const char* train_task, const char* eval_file, const char* eval_task,
                         const char* head_path, const char* out_dir, const char* generation_endpoint,
                         int extract_fence, char** summary_json) {
  return guarded([&] {
    require(engine && eval_file && out_dir, "engine, eval_file, and out_dir are required");
    mmcoir::IngestOptions o;
    o.task_tag = opt_str(train_task);
    std::optional<mmcoir::GenerationConfig> gen;
    if (generation_endpoint && *generation_endpoint) {
      gen.emplace();
      gen->endpoint = generation_endpoint;
      gen->extract_fence = extract_fence != 0;
      const auto& b = checked(engine).backend;
      gen->retry.max_retries = b.max_retries;
      gen->retry.backoff_ms = b.backoff_ms;
      gen->retry.timeout_ms = b.timeout_ms;
    }
    const auto s = mmcoir::cmd_rag(checked(engine), paths(train_files, n_train), o, eval_file, opt_str(eval_task),
                                   opt_path(head_path), out_dir, gen);
    if (summary_json) {
      nlohmann::ordered_json j;
      j["prompts"] = s.prompts;
      j["generations"] = s.generations;
      j["guard_violations"] = s.guard_violations;
      *summary_json = dup_string(j.dump());
    }
  });
}

mmcoir_status mmcoir_gen_fixtures(const char* kind, const char* out_dir, const uint64_t* seed) {
  return guarded([&] {
    require(kind && out_dir, "kind and out_dir are required");
    mmcoir::cmd_gen_fixtures(kind, out_dir, seed ? std::optional<std::uint64_t>(*seed) : std::nullopt);
  });
}

mmcoir_status mmcoir_index_load(const char* path, mmcoir_index** out) {
  return guarded([&] {
    require(path && out, "path and out are required");
    *out = new mmcoir_index{mmcoir::VectorIndex::load(path)};
  });
}

void mmcoir_index_destroy(mmcoir_index* index) { delete index; }

size_t mmcoir_index_size(const mmcoir_index* index) { return index ? index->index.size() : 0; }

size_t mmcoir_index_dim(const mmcoir_index* index) { return index ? index->index.dim() : 0; }

mmcoir_status mmcoir_index_search(const mmcoir_index* index, const float* query, size_t dim, size_t k,
                                  uint64_t* ids, double* scores, size_t* n_hits) {
  return guarded([&] {
    require(index && query && ids && scores && n_hits, "index, query, ids, scores, and n_hits are required");
    const auto r = index->index.search_topk(std::span<const float>(query, dim), k);
    for (std::size_t i = 0; i < r.hits.size(); ++i) {
      ids[i] = r.hits[i].id;
      scores[i] = r.hits[i].score;
    }
    *n_hits = r.hits.size();
  });
}

mmcoir_status mmcoir_service_create(const mmcoir_engine* engine, const char* const* corpus_tags,
                                    const char* const* index_paths, size_t n_corpora, const char* head_path,
                                    mmcoir_service** out) {
  return guarded([&] {
    require(engine && out, "engine and out are required");
    require(n_corpora > 0 && corpus_tags && index_paths, "at least one corpus is required");
    std::vector<std::pair<std::string, std::filesystem::path>> corpora;
    for (size_t i = 0; i < n_corpora; ++i) {
      require(corpus_tags[i] && index_paths[i], "corpus entry is null");
      corpora.emplace_back(corpus_tags[i], index_paths[i]);
    }
    auto state = mmcoir::load_service_state(checked(engine), corpora, opt_path(head_path));
    *out = new mmcoir_service{std::make_unique<mmcoir::RetrievalService>(state)};
  });
}

mmcoir_status mmcoir_service_start(mmcoir_service* service, const char* host, int port, int* bound_port) {
  return guarded([&] {
    require(service && host, "service and host are required");
    const int p = service->service->start(host, port);
    if (bound_port) *bound_port = p;
  });
}

mmcoir_status mmcoir_service_run(mmcoir_service* service, const char* host, int port) {
  return guarded([&] {
    require(service && host, "service and host are required");
    service->service->listen(host, port);
  });
}

void mmcoir_service_stop(mmcoir_service* service) {
  if (service) service->service->stop();
}

void mmcoir_service_destroy(mmcoir_service* service) { delete service; }

}  // extern "C"
