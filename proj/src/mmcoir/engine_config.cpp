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


#include "mmcoir/engine_config.hpp"

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <set>

#include <nlohmann/json.hpp>

#include "mmcoir/error.hpp"
#include "mmcoir/hashing.hpp"
#include "mmcoir/io_util.hpp"

namespace mmcoir {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// Reads fields of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& obj, std::string name) : obj_(obj), name_(std::move(name)) {
    if (!obj_.is_object()) fail("", "must be an object");
  }

  template <typename T>
  void take(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key) || obj_[key].is_null()) return;
    try {
      out = obj_[key].get<T>();
    } catch (const json::exception&) {
      fail(key, "has the wrong type");
    }
  }

  void take_path(const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    take(key, s);
    out = s;
  }

  void take_opt(const char* key, std::optional<std::string>& out) {
    seen_.insert(key);
    if (!obj_.contains(key) || obj_[key].is_null()) return;
    if (!obj_[key].is_string()) fail(key, "must be a string");
    out = obj_[key].get<std::string>();
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    return obj_.contains(key) && !obj_[key].is_null() ? &obj_[key] : nullptr;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) fail(it.key(), "is not a known field");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const std::string field = key.empty() ? name_ : (name_.empty() ? key : name_ + "." + key);
    raise(ErrorCode::kConfigError, "config field '" + (field.empty() ? std::string("<root>") : field) + "' " + what);
  }

 private:
  const json& obj_;
  std::string name_;
  std::set<std::string> seen_;
};

template <typename E>
E pick(Section& s, const char* key, const std::vector<std::pair<std::string, E>>& names, E current) {
  std::string v;
  for (const auto& [n, e] : names) {
    if (e == current) v = n;
  }
  s.take(key, v);
  for (const auto& [n, e] : names) {
    if (n == v) return e;
  }
  s.fail(key, "has unknown value '" + v + "'");
}

const std::vector<std::pair<std::string, BackendKind>> kBackendNames = {{"builtin", BackendKind::kBuiltinHash},
                                                                        {"remote", BackendKind::kRemote}};
const std::vector<std::pair<std::string, OptimizerKind>> kOptimizerNames = {{"adam", OptimizerKind::kAdam},
                                                                            {"sgd", OptimizerKind::kSgd}};
const std::vector<std::pair<std::string, ScheduleKind>> kScheduleNames = {{"linear", ScheduleKind::kLinear}};
const std::vector<std::pair<std::string, PoolMode>> kPoolNames = {{"per_task", PoolMode::kPerTask},
                                                                  {"merged", PoolMode::kMerged}};
const std::vector<std::pair<std::string, GuardKind>> kGuardNames = {{"content_hash", GuardKind::kContentHash},
                                                                    {"string_identity", GuardKind::kStringIdentity}};

template <typename E>
std::string name_of(const std::vector<std::pair<std::string, E>>& names, E e) {
  for (const auto& [n, v] : names) {
    if (v == e) return n;
  }
  return "?";
}

}  // namespace

void EngineConfig::validate() const {
  backend.validate();
  scoring.validate();
  trainer.validate();
  rag.validate();
  if (budgets.empty()) raise(ErrorCode::kConfigError, "config field 'budgets' is empty");
  for (std::size_t b : budgets) {
    if (b == 0) raise(ErrorCode::kConfigError, "config field 'budgets' contains 0");
  }
}

EngineConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorCode::kConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  EngineConfig c;
  Section root(doc, "");
  root.take_path("data_root", c.data_root);
  root.take_path("run_root", c.run_root);
  root.take("seed", c.seed);
  root.take("budgets", c.budgets);
  c.pools = pick(root, "pools", kPoolNames, c.pools);
  if (const json* b = root.sub("backend")) {
    Section s(*b, "backend");
    c.backend.kind = pick(s, "kind", kBackendNames, c.backend.kind);
    s.take("dim", c.backend.dim);
    s.take_opt("endpoint", c.backend.endpoint);
    s.take("token_budget", c.backend.token_budget);
    std::optional<std::string> cache;
    s.take_opt("cache_dir", cache);
    if (cache) c.backend.cache_dir = *cache;
    s.take_path("image_root", c.backend.image_root);
    s.take("model", c.backend.model);
    s.take("batch_size", c.backend.batch_size);
    s.take("max_in_flight", c.backend.max_in_flight);
    s.take("max_retries", c.backend.max_retries);
    s.take("backoff_ms", c.backend.backoff_ms);
    s.take("timeout_ms", c.backend.timeout_ms);
    s.finish();
  }
  if (const json* b = root.sub("scoring")) {
    Section s(*b, "scoring");
    s.take("tau", c.scoring.temperature);
    s.finish();
  }
  if (const json* b = root.sub("trainer")) {
    Section s(*b, "trainer");
    s.take("learning_rate", c.trainer.learning_rate);
    s.take("warmup_steps", c.trainer.warmup_steps);
    s.take("total_steps", c.trainer.total_steps);
    c.trainer.schedule = pick(s, "schedule", kScheduleNames, c.trainer.schedule);
    s.take("batch_size", c.trainer.batch_size);
    c.trainer.optimizer = pick(s, "optimizer", kOptimizerNames, c.trainer.optimizer);
    s.take("beta1", c.trainer.beta1);
    s.take("beta2", c.trainer.beta2);
    s.take("epsilon", c.trainer.epsilon);
    s.take("hard_negatives", c.trainer.hard_negatives);
    s.take("checkpoint_every", c.trainer.checkpoint_every);
    s.finish();
  }
  if (const json* b = root.sub("head")) {
    Section s(*b, "head");
    s.take("shared", c.head.shared);
    s.take("bias", c.head.bias);
    s.take("d_out", c.head.d_out);
    s.finish();
  }
  if (const json* b = root.sub("rag")) {
    Section s(*b, "rag");
    s.take("k", c.rag.k);
    s.take("corpus_tag", c.rag.corpus_tag);
    c.rag.guard = pick(s, "guard", kGuardNames, c.rag.guard);
    s.take("prompt_template_id", c.rag.prompt_template_id);
    s.take("max_exemplar_units", c.rag.max_exemplar_units);
    s.finish();
  }
  root.finish();
  c.trainer.seed = c.seed;
  c.trainer.token_budget = c.backend.token_budget;
  c.rag.token_budget = c.backend.token_budget;
  return c;
}

EngineConfig load_config(const std::filesystem::path& path) {
  auto text = try_read_file(path);
  if (!text) raise(ErrorCode::kConfigError, "cannot read config file " + path.string());
  return parse_config(*text);
}

void apply_env(EngineConfig& cfg, const EnvLookup& lookup) {
  if (const char* v = lookup("MMCOIR_DATA_ROOT"); v && *v) cfg.data_root = v;
  if (const char* v = lookup("MMCOIR_BACKEND_URL"); v && *v) {
    cfg.backend.endpoint = v;
    cfg.backend.kind = BackendKind::kRemote;
  }
  if (const char* v = lookup("MMCOIR_SEED"); v && *v) {
    char* end = nullptr;
    errno = 0;
    const unsigned long long s = std::strtoull(v, &end, 10);
    if (errno != 0 || end == v || *end != '\0' || v[0] == '-') {
      raise(ErrorCode::kConfigError, "MMCOIR_SEED is not an unsigned integer: '" + std::string(v) + "'");
    }
    cfg.seed = s;
    cfg.trainer.seed = s;
  }
}

std::string config_json(const EngineConfig& c) {
  ojson j;
  j["data_root"] = c.data_root.string();
  j["run_root"] = c.run_root.string();
  j["seed"] = c.seed;
  j["budgets"] = c.budgets;
  j["pools"] = name_of(kPoolNames, c.pools);
  ojson& b = j["backend"];
  b["kind"] = name_of(kBackendNames, c.backend.kind);
  b["dim"] = c.backend.dim;
  b["endpoint"] = c.backend.endpoint ? ojson(*c.backend.endpoint) : ojson(nullptr);
  b["token_budget"] = c.backend.token_budget;
  b["cache_dir"] = c.backend.cache_dir ? ojson(c.backend.cache_dir->string()) : ojson(nullptr);
  b["image_root"] = c.backend.image_root.string();
  b["model"] = c.backend.model;
  b["batch_size"] = c.backend.batch_size;
  b["max_in_flight"] = c.backend.max_in_flight;
  b["max_retries"] = c.backend.max_retries;
  b["backoff_ms"] = c.backend.backoff_ms;
  b["timeout_ms"] = c.backend.timeout_ms;
  j["scoring"]["tau"] = c.scoring.temperature;
  ojson& t = j["trainer"];
  t["learning_rate"] = c.trainer.learning_rate;
  t["warmup_steps"] = c.trainer.warmup_steps;
  t["total_steps"] = c.trainer.total_steps;
  t["schedule"] = name_of(kScheduleNames, c.trainer.schedule);
  t["batch_size"] = c.trainer.batch_size;
  t["optimizer"] = name_of(kOptimizerNames, c.trainer.optimizer);
  t["beta1"] = c.trainer.beta1;
  t["beta2"] = c.trainer.beta2;
  t["epsilon"] = c.trainer.epsilon;
  t["hard_negatives"] = c.trainer.hard_negatives;
  t["checkpoint_every"] = c.trainer.checkpoint_every;
  ojson& h = j["head"];
  h["shared"] = c.head.shared;
  h["bias"] = c.head.bias;
  h["d_out"] = c.head.d_out;
  ojson& r = j["rag"];
  r["k"] = c.rag.k;
  r["corpus_tag"] = c.rag.corpus_tag;
  r["guard"] = name_of(kGuardNames, c.rag.guard);
  r["prompt_template_id"] = c.rag.prompt_template_id;
  r["max_exemplar_units"] = c.rag.max_exemplar_units;
  return j.dump(2) + "\n";
}

std::string config_fingerprint(const EngineConfig& cfg) {
  return content_digest(config_json(cfg)).hex().substr(0, 16);
}

std::filesystem::path make_run_dir(const EngineConfig& cfg) {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%SZ", &tm);
  const std::string base = std::string(stamp) + "-" + config_fingerprint(cfg);
  std::filesystem::path dir = cfg.run_root / base;
  for (int n = 1; std::filesystem::exists(dir); ++n) dir = cfg.run_root / (base + "-" + std::to_string(n));
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) raise(ErrorCode::kIoError, "cannot create run directory " + dir.string() + ": " + ec.message());
  write_file_atomic(dir / "config.json", config_json(cfg));
  return dir;
}

std::filesystem::path resolve_data_path(const EngineConfig& cfg, const std::filesystem::path& p) {
  return p.is_relative() ? cfg.data_root / p : p;
}

}  // namespace mmcoir
