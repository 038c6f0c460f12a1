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


// Command-line front end. Links only the public C API.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mmcoir.h"

namespace {

// Thrown after a C API failure; the message is already in mmcoir_last_error.
struct ApiFailure {
  mmcoir_status status;
};

void check(mmcoir_status s) {
  if (s != MMCOIR_OK) throw ApiFailure{s};
}

// Owns a char* handed out by the library.
class OwnedString {
 public:
  OwnedString() = default;
  OwnedString(const OwnedString&) = delete;
  OwnedString& operator=(const OwnedString&) = delete;
  ~OwnedString() { mmcoir_string_free(p_); }
  char** out() { return &p_; }
  std::string str() const { return p_ ? std::string(p_) : std::string(); }

 private:
  char* p_ = nullptr;
};

struct EngineHandle {
  mmcoir_engine* e = nullptr;
  ~EngineHandle() { mmcoir_engine_destroy(e); }
};

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

mmcoir_row_kind parse_kind(const std::string& k) { return k == "train" ? MMCOIR_ROWS_TRAIN : MMCOIR_ROWS_EVAL; }

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

mmcoir_service* g_service = nullptr;

void on_signal(int) {
  if (g_service) mmcoir_service_stop(g_service);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal code retrieval engine"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mmcoir_version()));

  std::string config_path;
  std::string data_root;
  std::string backend_url;
  std::optional<std::uint64_t> seed;
  std::string run_dir;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--data-root", data_root, "Root for relative data paths (overrides MMCOIR_DATA_ROOT)");
  app.add_option("--backend-url", backend_url, "Remote embedding server (overrides MMCOIR_BACKEND_URL)");
  app.add_option("--seed", seed, "Run seed (overrides MMCOIR_SEED)");
  app.add_option("--run-dir", run_dir, "Write outputs here instead of a fresh run directory");
  app.add_option("--set", overrides, "Config override key=value, e.g. trainer.total_steps=200");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a JSONL file and write normalized rows");
  std::string kind = "eval", input, dataset_tag, task_tag;
  bool lenient = false;
  ingest->add_option("--kind", kind)->check(CLI::IsMember({"train", "eval"}));
  ingest->add_option("input", input)->required();
  ingest->add_option("--dataset", dataset_tag, "Dataset tag (default: file stem)");
  ingest->add_option("--task", task_tag, "Task tag for rows without one");
  ingest->add_flag("--lenient", lenient, "Skip malformed rows instead of failing");

  auto* lengths = app.add_subcommand("length-report", "Token length histogram of a corpus");
  std::vector<std::string> train_files;
  std::string eval_file, eval_task;
  lengths->add_option("--train", train_files);
  lengths->add_option("--eval", eval_file);
  lengths->add_option("--eval-task", eval_task);

  auto* embed = app.add_subcommand("embed", "Embed queries and targets of a file");
  embed->add_option("--kind", kind)->check(CLI::IsMember({"train", "eval"}));
  embed->add_option("input", input)->required();
  embed->add_option("--task", task_tag);

  auto* train = app.add_subcommand("train", "Train a projection head with InfoNCE");
  train->add_option("train_files", train_files)->required();
  train->add_option("--task", task_tag, "Task tag for rows without one");

  auto* index = app.add_subcommand("index", "Build a vector index over the targets of a file");
  std::string corpus_tag, head_path, out_path;
  index->add_option("--kind", kind)->check(CLI::IsMember({"train", "eval"}));
  index->add_option("input", input)->required();
  index->add_option("--corpus", corpus_tag)->required();
  index->add_option("--task", task_tag);
  index->add_option("--head", head_path, "Projection head checkpoint");
  index->add_option("-o,--out", out_path, "Index path (default: <run dir>/<corpus>.idx)");

  auto* search = app.add_subcommand("search", "Query an index");
  std::string index_path, request_json, instruction, text, code, image_path;
  std::size_t k = 10;
  search->add_option("--index", index_path)->required();
  search->add_option("--head", head_path);
  search->add_option("--request", request_json, "Full request body as JSON");
  search->add_option("--instruction", instruction);
  search->add_option("--text", text);
  search->add_option("--code", code);
  search->add_option("--image", image_path);
  search->add_option("--corpus", corpus_tag);
  search->add_option("-k", k);

  auto* eval = app.add_subcommand("eval", "Evaluate a manifest of tasks");
  std::string manifest;
  bool merge_pools = false;
  eval->add_option("manifest", manifest)->required();
  eval->add_option("--head", head_path);
  eval->add_flag("--merge-pools", merge_pools, "Rank against the union of all targets in each dataset file");

  auto* ablate = app.add_subcommand("ablate-len", "Evaluate a manifest at several token budgets");
  std::vector<std::size_t> budgets;
  ablate->add_option("manifest", manifest)->required();
  ablate->add_option("--head", head_path);
  ablate->add_option("--budgets", budgets)->delimiter(',');

  auto* rag = app.add_subcommand("rag", "Build retrieval-augmented prompts and optionally generate");
  std::string train_task, generate_url;
  bool extract_fence = false;
  rag->add_option("--train", train_files)->required();
  rag->add_option("--train-task", train_task);
  rag->add_option("--eval", eval_file)->required();
  rag->add_option("--eval-task", eval_task);
  rag->add_option("--head", head_path);
  rag->add_option("--generate", generate_url, "Generation server base URL");
  rag->add_flag("--extract-fence", extract_fence, "Keep only the first fenced block of each generation");

  auto* serve = app.add_subcommand("serve", "Serve read-only retrieval over HTTP");
  std::vector<std::string> corpora;
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--corpus", corpora, "tag=index_path, repeatable")->required();
  serve->add_option("--head", head_path);
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  auto* fixtures = app.add_subcommand("gen-fixtures", "Write a synthetic dataset");
  std::string fixture_kind;
  fixtures->add_option("fixture", fixture_kind)->required()->check(
      CLI::IsMember({"planted-feature", "planted-position"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& c : msg) {
      if (c == '\n') c = ' ';
    }
    std::cerr << "error=UsageError message=" << msg << "\n";
    return 2;
  }

  try {
    EngineHandle engine;
    check(mmcoir_engine_create(or_null(config_path), 1, &engine.e));
    if (!data_root.empty()) check(mmcoir_engine_set(engine.e, "data_root", data_root.c_str()));
    if (!backend_url.empty()) {
      check(mmcoir_engine_set(engine.e, "backend.kind", "remote"));
      check(mmcoir_engine_set(engine.e, "backend.endpoint", backend_url.c_str()));
    }
    if (seed) check(mmcoir_engine_set(engine.e, "seed", std::to_string(*seed).c_str()));
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::cerr << "error=UsageError message=--set expects key=value, got '" << kv << "'\n";
        return 2;
      }
      check(mmcoir_engine_set(engine.e, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
    }
    if (merge_pools) check(mmcoir_engine_set(engine.e, "pools", "merged"));
    if (!budgets.empty()) {
      check(mmcoir_engine_set(engine.e, "budgets", nlohmann::json(budgets).dump().c_str()));
    }

    bool run_dir_ready = false;
    auto out_dir = [&]() -> const std::string& {
      if (!run_dir_ready) {
        if (run_dir.empty()) {
          OwnedString p;
          check(mmcoir_engine_make_run_dir(engine.e, p.out()));
          run_dir = p.str();
        } else {
          std::filesystem::create_directories(run_dir);
          OwnedString cfg;
          check(mmcoir_engine_config_json(engine.e, cfg.out()));
          std::ofstream(run_dir + "/config.json", std::ios::binary) << cfg.str();
        }
        std::cerr << "run_dir=" << run_dir << "\n";
        run_dir_ready = true;
      }
      return run_dir;
    };

    if (*ingest) {
      std::size_t rows = 0, rejects = 0;
      check(mmcoir_ingest(engine.e, parse_kind(kind), input.c_str(), or_null(dataset_tag), or_null(task_tag), lenient,
                          out_dir().c_str(), &rows, &rejects));
      std::cout << "rows=" << rows << " rejects=" << rejects << "\n";
    } else if (*lengths) {
      auto files = c_strings(train_files);
      check(mmcoir_length_report(engine.e, files.data(), files.size(), or_null(eval_file), or_null(eval_task),
                                 out_dir().c_str()));
    } else if (*embed) {
      std::size_t n = 0;
      check(mmcoir_embed(engine.e, parse_kind(kind), input.c_str(), or_null(task_tag), out_dir().c_str(), &n));
      std::cout << "vectors=" << n << "\n";
    } else if (*train) {
      auto files = c_strings(train_files);
      OwnedString summary;
      check(mmcoir_train(engine.e, files.data(), files.size(), or_null(task_tag), out_dir().c_str(), summary.out()));
      std::cout << summary.str() << "\n";
    } else if (*index) {
      if (out_path.empty()) out_path = out_dir() + "/" + corpus_tag + ".idx";
      std::size_t n = 0;
      check(mmcoir_index_build(engine.e, parse_kind(kind), input.c_str(), corpus_tag.c_str(), or_null(task_tag),
                               or_null(head_path), out_path.c_str(), &n));
      std::cout << "entries=" << n << " index=" << out_path << "\n";
    } else if (*search) {
      if (request_json.empty()) {
        nlohmann::json req;
        req["instruction"] = instruction;
        if (!text.empty()) req["text"] = text;
        if (!code.empty()) req["code"] = code;
        if (!image_path.empty()) req["image_b64"] = httplib::detail::base64_encode(read_all(image_path));
        req["corpus"] = corpus_tag;
        req["k"] = k;
        request_json = req.dump();
      }
      OwnedString response;
      check(mmcoir_search(engine.e, index_path.c_str(), or_null(head_path), request_json.c_str(), response.out()));
      const auto body = nlohmann::json::parse(response.str());
      for (const auto& h : body.at("hits")) {
        std::printf("%llu\t%.6f\n", static_cast<unsigned long long>(h.at("id").get<std::uint64_t>()),
                    h.at("score").get<double>());
      }
      std::ofstream(out_dir() + "/search.json") << body.dump(2) << "\n";
    } else if (*eval) {
      OwnedString csv;
      check(mmcoir_eval(engine.e, manifest.c_str(), or_null(head_path), out_dir().c_str(), csv.out()));
      std::cout << csv.str();
    } else if (*ablate) {
      OwnedString csv;
      check(mmcoir_ablate_len(engine.e, manifest.c_str(), or_null(head_path), out_dir().c_str(), csv.out()));
      std::cout << csv.str();
    } else if (*rag) {
      auto files = c_strings(train_files);
      OwnedString summary;
      check(mmcoir_rag(engine.e, files.data(), files.size(), or_null(train_task), eval_file.c_str(),
                       or_null(eval_task), or_null(head_path), out_dir().c_str(), or_null(generate_url),
                       extract_fence, summary.out()));
      std::cout << summary.str() << "\n";
    } else if (*serve) {
      std::vector<std::string> tags, paths;
      for (const auto& c : corpora) {
        const auto eq = c.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == c.size()) {
          std::cerr << "error=UsageError message=--corpus expects tag=index_path, got '" << c << "'\n";
          return 2;
        }
        tags.push_back(c.substr(0, eq));
        paths.push_back(c.substr(eq + 1));
      }
      auto tag_ptrs = c_strings(tags);
      auto path_ptrs = c_strings(paths);
      check(mmcoir_service_create(engine.e, tag_ptrs.data(), path_ptrs.data(), tags.size(), or_null(head_path),
                                  &g_service));
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << host << ":" << port << "\n";
      const mmcoir_status s = mmcoir_service_run(g_service, host.c_str(), port);
      mmcoir_service_destroy(g_service);
      g_service = nullptr;
      check(s);
    } else if (*fixtures) {
      const std::uint64_t* seed_ptr = seed ? &*seed : nullptr;
      check(mmcoir_gen_fixtures(fixture_kind.c_str(), out_dir().c_str(), seed_ptr));
    }
    return 0;
  } catch (const ApiFailure& f) {
    std::cerr << mmcoir_last_error() << "\n";
    return static_cast<int>(f.status);
  } catch (const std::exception& e) {
    std::cerr << "error=Internal message=" << e.what() << "\n";
    return static_cast<int>(MMCOIR_INTERNAL);
  }
}
