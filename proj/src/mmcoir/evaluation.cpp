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


#include "mmcoir/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mmcoir/error.hpp"
#include "mmcoir/hashing.hpp"
#include "mmcoir/io_util.hpp"
#include "mmcoir/vector_index.hpp"

namespace mmcoir {

namespace {

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Embeds in one go; on failure re-embeds item by item to name the culprit.
std::vector<EmbeddingVector> embed_labeled(EmbeddingBackend& backend, std::span<const SerializedItem> items,
                                           std::span<const EvalPair> pairs, const char* what) {
  try {
    return embed_all(backend, items);
  } catch (const Error& batch_error) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      try {
        backend.embed(items.subspan(i, 1));
      } catch (const Error& e) {
        raise(e.code(), std::string(what) + " row " + std::to_string(pairs[i].row) + ": " + e.what());
      }
    }
    throw;
  }
}

std::vector<EmbeddingVector> maybe_project(const ProjectionHead* head, Side side, std::vector<EmbeddingVector> v) {
  if (!head) return v;
  return head->project_all(side, v);
}

}  // namespace

std::string config_fingerprint(const EvalContext& ctx) {
  DigestBuilder b;
  b.add(ctx.backend ? ctx.backend->id() : std::string("none"));
  b.add(static_cast<std::uint64_t>(ctx.backend ? ctx.backend->dim() : 0));
  b.add(ctx.head ? ctx.head->fingerprint() : std::string("no-head"));
  b.add(static_cast<std::uint64_t>(ctx.token_budget));
  b.add(fmt17(ctx.scoring.temperature));
  b.add(ctx.seed);
  return b.finish().hex().substr(0, 16);
}

MetricsReport summarize(std::span<const Rank> ranks) {
  MetricsReport r;
  r.n_queries = ranks.size();
  r.ranks.assign(ranks.begin(), ranks.end());
  if (ranks.empty()) return r;
  const double n = static_cast<double>(ranks.size());
  for (std::size_t k : kReportCutoffs) {
    double hit = 0.0, ndcg = 0.0, recall = 0.0;
    for (const Rank& rk : ranks) {
      hit += hit_at_k(rk, k);
      ndcg += ndcg_at_k(rk, k);
      recall += recall_at_k(rk, k);
    }
    r.hit_at[k] = hit / n;
    r.ndcg_at[k] = ndcg / n;
    r.recall_at[k] = recall / n;
  }
  double mrr = 0.0;
  for (const Rank& rk : ranks) mrr += reciprocal_rank(rk);
  r.mrr = mrr / n;
  return r;
}

SerializedItem eval_query_item(const EvalPair& pair, std::size_t budget) {
  const Direction dir = parse_direction(pair.task_tag);
  const QuerySpec q = make_query(pair.qry_text, pair.qry_img_path, dir);
  return compose_query(q.item, q.instruction, budget);
}

SerializedItem eval_target_item(const EvalPair& pair, std::size_t budget) {
  return compose_target(make_target(pair.tgt_text, pair.tgt_img_path), budget);
}

MetricsReport evaluate_against(std::span<const EvalPair> pairs, std::span<const EvalPair> pool_pairs,
                               const EvalContext& ctx) {
  if (!ctx.backend) raise(ErrorCode::kInvalidArgument, "evaluation needs a backend");
  if (pairs.empty()) raise(ErrorCode::kInvalidArgument, "evaluation needs at least one pair");
  ctx.scoring.validate();

  // Distinct targets in first-appearance order; pool id = position.
  std::unordered_map<std::string, std::size_t> key_to_id;
  std::vector<SerializedItem> pool_items;
  std::vector<EvalPair> pool_src;
  auto target_key = [&](const SerializedItem& item) {
    return DigestBuilder().add(item.canonical_text).add(image_digest(item, ctx.image_root).hex()).finish().hex();
  };
  for (const auto& p : pool_pairs) {
    SerializedItem item = eval_target_item(p, ctx.token_budget);
    if (key_to_id.emplace(target_key(item), pool_items.size()).second) {
      pool_items.push_back(std::move(item));
      pool_src.push_back(p);
    }
  }
  std::vector<std::size_t> own(pairs.size());
  std::vector<SerializedItem> query_items;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto it = key_to_id.find(target_key(eval_target_item(pairs[i], ctx.token_budget)));
    if (it == key_to_id.end()) {
      raise(ErrorCode::kInvalidArgument, "query row " + std::to_string(pairs[i].row) + ": target missing from pool");
    }
    own[i] = it->second;
    query_items.push_back(eval_query_item(pairs[i], ctx.token_budget));
  }

  auto targets = maybe_project(ctx.head, Side::kTarget, embed_labeled(*ctx.backend, pool_items, pool_src, "target"));
  auto queries = maybe_project(ctx.head, Side::kQuery, embed_labeled(*ctx.backend, query_items, pairs, "query"));

  std::vector<ItemId> ids(targets.size());
  std::vector<PayloadRef> refs(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ids[i] = i;
    refs[i] = PayloadRef{pool_src[i].dataset_tag, pool_src[i].row,
                         make_target(pool_src[i].tgt_text, pool_src[i].tgt_img_path).mask()};
  }
  const VectorIndex index = VectorIndex::build(targets, ids, refs);

  std::vector<Rank> ranks(pairs.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto scores = index.score_all(queries[i].values);
      const Hit mine{own[i], scores[own[i]]};
      std::size_t before = 0;
      for (std::size_t j = 0; j < scores.size(); ++j) {
        if (ranks_before(Hit{ids[j], scores[j]}, mine)) ++before;
      }
      ranks[i] = before + 1;
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(ctx.threads, pairs.size()));
  if (threads == 1) {
    work(0, pairs.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t block = (pairs.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = std::min(pairs.size(), t * block);
      pool.emplace_back(work, b, std::min(pairs.size(), b + block));
    }
    for (auto& th : pool) th.join();
  }

  MetricsReport report = summarize(ranks);
  report.dataset_tag = pairs.front().dataset_tag;
  report.task_tag = pairs.front().task_tag;
  report.token_budget = ctx.token_budget;
  report.config_fingerprint = config_fingerprint(ctx);
  return report;
}

MetricsReport evaluate_task(std::span<const EvalPair> pairs, const EvalContext& ctx) {
  return evaluate_against(pairs, pairs, ctx);
}

std::vector<SuiteEntry> parse_manifest(std::string_view json, const std::filesystem::path& base) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::kConfigError, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) raise(ErrorCode::kConfigError, "manifest must be a JSON array");
  std::vector<SuiteEntry> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& row = doc[i];
    auto field = [&](const char* key) -> std::string {
      if (!row.is_object() || !row.contains(key) || !row[key].is_string()) {
        raise(ErrorCode::kConfigError, "manifest row " + std::to_string(i + 1) + ": missing string field '" + key + "'");
      }
      return row[key].get<std::string>();
    };
    SuiteEntry e{field("dataset"), field("task"), field("file")};
    parse_direction(e.task_tag);
    if (e.file.is_relative()) e.file = base / e.file;
    out.push_back(std::move(e));
  }
  return out;
}

MetricsReport macro_average(std::span<const MetricsReport> rows) {
  MetricsReport m;
  m.dataset_tag = "ALL";
  m.task_tag = "macro";
  if (rows.empty()) return m;
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    m.n_queries += r.n_queries;
    for (const auto& [k, v] : r.hit_at) m.hit_at[k] += v / n;
    for (const auto& [k, v] : r.ndcg_at) m.ndcg_at[k] += v / n;
    for (const auto& [k, v] : r.recall_at) m.recall_at[k] += v / n;
    m.mrr += r.mrr / n;
  }
  m.token_budget = rows.front().token_budget;
  m.config_fingerprint = rows.front().config_fingerprint;
  for (const auto& r : rows) {
    if (r.config_fingerprint != m.config_fingerprint) m.config_fingerprint = "mixed";
  }
  return m;
}

SuiteReport evaluate_suite(std::span<const SuiteEntry> manifest, const EvalContext& ctx, PoolMode pools) {
  if (manifest.empty()) raise(ErrorCode::kInvalidArgument, "empty manifest");
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    if (!std::filesystem::is_regular_file(manifest[i].file)) {
      raise(ErrorCode::kIoError, "manifest row " + std::to_string(i + 1) + " (" + manifest[i].dataset_tag + ", " +
                                     manifest[i].task_tag + "): missing file " + manifest[i].file.string());
    }
  }
  std::vector<std::vector<EvalPair>> tasks;
  for (const auto& e : manifest) {
    std::ifstream in(e.file, std::ios::binary);
    if (!in) raise(ErrorCode::kIoError, "cannot open " + e.file.string());
    IngestOptions opts;
    opts.dataset_tag = e.dataset_tag;
    opts.task_tag = e.task_tag;
    tasks.push_back(ingest_eval(in, opts).rows);
  }
  std::vector<EvalPair> merged;
  if (pools == PoolMode::kMerged) {
    for (const auto& t : tasks) merged.insert(merged.end(), t.begin(), t.end());
  }
  SuiteReport suite;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].empty()) {
      raise(ErrorCode::kInvalidArgument, "manifest row " + std::to_string(i + 1) + ": no evaluation pairs");
    }
    MetricsReport r = pools == PoolMode::kMerged ? evaluate_against(tasks[i], merged, ctx)
                                                 : evaluate_task(tasks[i], ctx);
    r.dataset_tag = manifest[i].dataset_tag;
    r.task_tag = manifest[i].task_tag;
    suite.rows.push_back(std::move(r));
  }
  suite.macro = macro_average(suite.rows);
  return suite;
}

namespace {

std::string csv_row(const MetricsReport& r) {
  auto at = [](const std::map<std::size_t, double>& m, std::size_t k) {
    auto it = m.find(k);
    return fmt6(it == m.end() ? 0.0 : it->second);
  };
  return r.dataset_tag + "," + r.task_tag + "," + std::to_string(r.n_queries) + "," + at(r.hit_at, 1) + "," +
         at(r.hit_at, 5) + "," + at(r.hit_at, 10) + "," + at(r.ndcg_at, 10) + "," + fmt6(r.mrr) + "," +
         at(r.recall_at, 10) + "," + r.config_fingerprint + "\n";
}

constexpr std::string_view kReportHeader = "dataset,task,n,hit@1,hit@5,hit@10,ndcg@10,mrr,recall@10,fingerprint\n";

nlohmann::ordered_json row_json(const MetricsReport& r) {
  auto num = [](double v) { return std::stod(fmt6(v)); };
  auto at = [&](const std::map<std::size_t, double>& m, std::size_t k) {
    auto it = m.find(k);
    return num(it == m.end() ? 0.0 : it->second);
  };
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset_tag;
  j["task"] = r.task_tag;
  j["n"] = r.n_queries;
  j["hit@1"] = at(r.hit_at, 1);
  j["hit@5"] = at(r.hit_at, 5);
  j["hit@10"] = at(r.hit_at, 10);
  j["ndcg@10"] = at(r.ndcg_at, 10);
  j["mrr"] = num(r.mrr);
  j["recall@10"] = at(r.recall_at, 10);
  j["fingerprint"] = r.config_fingerprint;
  return j;
}

}  // namespace

std::string report_csv(std::span<const MetricsReport> rows) {
  std::string out(kReportHeader);
  for (const auto& r : rows) out += csv_row(r);
  return out;
}

std::string suite_csv(const SuiteReport& suite) {
  std::string out = report_csv(suite.rows);
  out += csv_row(suite.macro);
  return out;
}

std::string suite_json(const SuiteReport& suite) {
  nlohmann::ordered_json doc;
  doc["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : suite.rows) doc["rows"].push_back(row_json(r));
  doc["macro"] = row_json(suite.macro);
  return doc.dump(2) + "\n";
}

std::vector<MetricsReport> length_ablation(std::span<const EvalPair> pairs, const EvalContext& ctx,
                                           std::span<const std::size_t> budgets) {
  if (budgets.empty()) raise(ErrorCode::kInvalidArgument, "length ablation needs at least one budget");
  std::vector<MetricsReport> out;
  for (std::size_t b : budgets) {
    EvalContext c = ctx;
    c.token_budget = b;
    out.push_back(evaluate_task(pairs, c));
  }
  return out;
}

std::string ablation_csv(std::span<const MetricsReport> rows) {
  std::string out = "budget," + std::string(kReportHeader);
  for (const auto& r : rows) out += std::to_string(r.token_budget) + "," + csv_row(r);
  return out;
}

}  // namespace mmcoir
