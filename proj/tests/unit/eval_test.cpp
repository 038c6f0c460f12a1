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


#include <algorithm>
#include <cmath>
#include <chrono>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "mmcoir/error.hpp"
#include "mmcoir/evaluation.hpp"
#include "mmcoir/io_util.hpp"
#include "mmcoir/synthetic.hpp"
#include "test_support.hpp"

namespace mmcoir {
namespace {

using testing::TempDir;

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

TEST(Metrics, Examples) {
  EXPECT_EQ(hit_at_k(1, 1), 1.0);
  EXPECT_EQ(hit_at_k(2, 1), 0.0);
  EXPECT_EQ(hit_at_k(10, 10), 1.0);
  EXPECT_EQ(ndcg_at_k(1, 10), 1.0);
  EXPECT_NEAR(ndcg_at_k(2, 10), 1.0 / std::log2(3.0), 1e-12);
  EXPECT_NEAR(ndcg_at_k(2, 10), 0.63093, 1e-5);
  EXPECT_EQ(ndcg_at_k(11, 10), 0.0);
  EXPECT_EQ(reciprocal_rank(4), 0.25);
  for (std::size_t k : {1U, 5U, 10U}) {
    EXPECT_EQ(hit_at_k(std::nullopt, k), 0.0);
    EXPECT_EQ(ndcg_at_k(std::nullopt, k), 0.0);
    EXPECT_EQ(recall_at_k(std::nullopt, k), 0.0);
  }
  EXPECT_EQ(reciprocal_rank(std::nullopt), 0.0);
}

// Reference metrics computed from a ranked relevance list rather than from
// the rank number.
struct Reference {
  std::vector<int> rel;  // 0/1 per position of the ranking
  double hit(std::size_t k) const {
    for (std::size_t i = 0; i < std::min(k, rel.size()); ++i) {
      if (rel[i]) return 1.0;
    }
    return 0.0;
  }
  double ndcg(std::size_t k) const {
    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, rel.size()); ++i) dcg += rel[i] / std::log2(static_cast<double>(i) + 2.0);
    return dcg / 1.0;  // ideal ranking puts the single relevant item first
  }
  double rr() const {
    for (std::size_t i = 0; i < rel.size(); ++i) {
      if (rel[i]) return 1.0 / static_cast<double>(i + 1);
    }
    return 0.0;
  }
  double recall(std::size_t k) const {
    double found = 0.0;
    for (std::size_t i = 0; i < std::min(k, rel.size()); ++i) found += rel[i];
    return found / 1.0;
  }
};

TEST(Metrics, MatchReferenceOnRandomRankings) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    Reference ref{std::vector<int>(n, 0)};
    Rank rank;
    if (rng() % 5) {
      const std::size_t pos = rng() % n;
      ref.rel[pos] = 1;
      rank = pos + 1;
    }
    const std::size_t k = 1 + rng() % 25;
    ASSERT_NEAR(hit_at_k(rank, k), ref.hit(k), 1e-12);
    ASSERT_NEAR(ndcg_at_k(rank, k), ref.ndcg(k), 1e-12);
    ASSERT_NEAR(reciprocal_rank(rank), ref.rr(), 1e-12);
    ASSERT_NEAR(recall_at_k(rank, k), ref.recall(k), 1e-12);
    ASSERT_EQ(recall_at_k(rank, k), hit_at_k(rank, k));
  }
}

TEST(Metrics, MonotoneInCutoff) {
  for (std::size_t r = 1; r < 40; ++r) {
    for (std::size_t k = 1; k < 40; ++k) {
      ASSERT_LE(hit_at_k(r, k), hit_at_k(r, k + 1));
      ASSERT_LE(ndcg_at_k(r, k), ndcg_at_k(r, k + 1));
    }
  }
}

TEST(Summarize, AveragesAndInvariants) {
  const std::vector<Rank> ranks = {1, 2, 7, std::nullopt};
  const auto r = summarize(ranks);
  EXPECT_EQ(r.n_queries, 4U);
  EXPECT_DOUBLE_EQ(r.hit_at.at(1), 0.25);
  EXPECT_DOUBLE_EQ(r.hit_at.at(5), 0.5);
  EXPECT_DOUBLE_EQ(r.hit_at.at(10), 0.75);
  EXPECT_NEAR(r.mrr, (1 + 0.5 + 1.0 / 7) / 4, 1e-15);
  EXPECT_NEAR(r.ndcg_at.at(10), (1 + 1 / std::log2(3.0) + 1 / std::log2(8.0)) / 4, 1e-15);
  for (std::size_t k : kReportCutoffs) EXPECT_EQ(r.recall_at.at(k), r.hit_at.at(k));
  EXPECT_EQ(r.ranks, ranks);
}

EvalPair code_pair(std::string q, std::string t, std::size_t row, std::string task = "qc→rc") {
  EvalPair p;
  p.qry_text = std::move(q);
  p.tgt_text = std::move(t);
  p.row = row;
  p.task_tag = std::move(task);
  p.dataset_tag = "unit";
  return p;
}

std::string words(std::mt19937_64& rng, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    for (int c = 0; c < 6; ++c) s += static_cast<char>('a' + rng() % 26);
  }
  return s;
}

TEST(EvaluateTask, OwnNearestNeighbourGivesPerfectScores) {
  std::mt19937_64 rng(2);
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < 40; ++i) {
    const std::string key = words(rng, 30);
    pairs.push_back(code_pair(key, key, i));
  }
  BuiltinBackend backend(256);
  EvalContext ctx;
  ctx.backend = &backend;
  const auto r = evaluate_task(pairs, ctx);
  EXPECT_EQ(r.n_queries, 40U);
  EXPECT_EQ(r.hit_at.at(1), 1.0);
  EXPECT_EQ(r.ndcg_at.at(10), 1.0);
  EXPECT_EQ(r.mrr, 1.0);
}

class ConstantBackend final : public EmbeddingBackend {
 public:
  std::string id() const override { return "constant"; }
  std::size_t dim() const override { return 4; }
  std::vector<EmbeddingVector> embed(std::span<const SerializedItem> items) override {
    return std::vector<EmbeddingVector>(items.size(), testing::unit_vector({0.5f, 0.5f, 0.5f, 0.5f}, "constant"));
  }
};

TEST(EvaluateTask, ConstantBackendFollowsTieRule) {
  // Targets with repeats; every score ties, so a query's rank is the
  // first-appearance position of its distinct target.
  const std::vector<std::string> tgts = {"A = 1", "B = 2", "A = 1", "C = 3", "B = 2", "D = 4"};
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < tgts.size(); ++i) pairs.push_back(code_pair("query " + std::to_string(i), tgts[i], i));
  std::vector<std::string> distinct;
  std::vector<Rank> want;
  for (const auto& t : tgts) {
    auto it = std::find(distinct.begin(), distinct.end(), t);
    if (it == distinct.end()) {
      distinct.push_back(t);
      it = distinct.end() - 1;
    }
    want.push_back(static_cast<std::size_t>(it - distinct.begin()) + 1);
  }
  ConstantBackend backend;
  EvalContext ctx;
  ctx.backend = &backend;
  const auto r = evaluate_task(pairs, ctx);
  EXPECT_EQ(r.ranks, want);
  EXPECT_DOUBLE_EQ(r.hit_at.at(1), 2.0 / 6.0);
}

TEST(EvaluateTask, DuplicatingTargetsLeavesMetricsUnchanged) {
  std::mt19937_64 rng(3);
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < 30; ++i) pairs.push_back(code_pair(words(rng, 8), words(rng, 8), i));
  BuiltinBackend backend(64);
  EvalContext ctx;
  ctx.backend = &backend;
  const auto once = evaluate_task(pairs, ctx);
  std::vector<EvalPair> doubled = pairs;
  doubled.insert(doubled.end(), pairs.begin(), pairs.end());
  const auto twice = evaluate_against(pairs, doubled, ctx);
  EXPECT_EQ(once.ranks, twice.ranks);
  EXPECT_EQ(report_csv(std::vector<MetricsReport>{once}), report_csv(std::vector<MetricsReport>{twice}));
}

TEST(EvaluateTask, ThreadsDoNotChangeRanks) {
  std::mt19937_64 rng(4);
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < 50; ++i) pairs.push_back(code_pair(words(rng, 5), words(rng, 5), i));
  BuiltinBackend backend(32);
  EvalContext ctx;
  ctx.backend = &backend;
  const auto a = evaluate_task(pairs, ctx);
  ctx.threads = 4;
  EXPECT_EQ(evaluate_task(pairs, ctx).ranks, a.ranks);
}

TEST(EvaluateTask, Errors) {
  BuiltinBackend backend(16);
  EvalContext ctx;
  EXPECT_EQ(code_of([&] { evaluate_task(std::vector<EvalPair>{code_pair("a", "b", 0)}, ctx); }),
            ErrorCode::kInvalidArgument);
  ctx.backend = &backend;
  EXPECT_EQ(code_of([&] { evaluate_task(std::vector<EvalPair>{}, ctx); }), ErrorCode::kInvalidArgument);
  const std::vector<EvalPair> pool = {code_pair("a", "b", 0)};
  const std::vector<EvalPair> stray = {code_pair("a", "zzz", 1)};
  EXPECT_EQ(code_of([&] { evaluate_against(stray, pool, ctx); }), ErrorCode::kInvalidArgument);
}

TEST(EvaluateTask, SyntheticTwoThousandPairsIsFast) {
  std::mt19937_64 rng(5);
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < 2000; ++i) pairs.push_back(code_pair(words(rng, 20), words(rng, 20), i));
  BuiltinBackend backend(256);
  EvalContext ctx;
  ctx.backend = &backend;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = evaluate_task(pairs, ctx);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(r.n_queries, 2000U);
  EXPECT_LT(secs, 10.0);
}

TEST(Suite, MacroAverageOfPerfectAndZero) {
  MetricsReport a = summarize(std::vector<Rank>{1, 1});
  MetricsReport b = summarize(std::vector<Rank>{std::nullopt});
  a.config_fingerprint = b.config_fingerprint = "f";
  const std::vector<MetricsReport> rows = {a, b};
  const auto m = macro_average(rows);
  EXPECT_EQ(m.hit_at.at(1), 0.5);
  EXPECT_EQ(m.n_queries, 3U);
  EXPECT_EQ(m.config_fingerprint, "f");
  std::vector<MetricsReport> mixed = rows;
  mixed[1].config_fingerprint = "g";
  EXPECT_EQ(macro_average(mixed).config_fingerprint, "mixed");
}

TEST(Suite, ManifestParsing) {
  const auto m = parse_manifest(R"([{"dataset":"d","task":"qi→rc","file":"x.jsonl"}])", "/base");
  ASSERT_EQ(m.size(), 1U);
  EXPECT_EQ(m[0].file, std::filesystem::path("/base/x.jsonl"));
  EXPECT_EQ(code_of([] { parse_manifest("{}", "."); }), ErrorCode::kConfigError);
  EXPECT_EQ(code_of([] { parse_manifest(R"([{"dataset":"d","file":"x"}])", "."); }), ErrorCode::kConfigError);
  EXPECT_EQ(code_of([] { parse_manifest("[", "."); }), ErrorCode::kConfigError);
}

TEST(Suite, MissingFileAbortsNamingTheRow) {
  const auto fx = testing::fixture_dir() / "smoke";
  const auto m = parse_manifest(R"([{"dataset":"smoke","task":"qi→rc","file":"eval.jsonl"},
                                   {"dataset":"gone","task":"qc→rc","file":"missing.jsonl"}])",
                                fx);
  BuiltinBackend backend(32, fx);
  EvalContext ctx;
  ctx.backend = &backend;
  try {
    evaluate_suite(m, ctx);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
    EXPECT_NE(std::string(e.what()).find("row 2 (gone"), std::string::npos) << e.what();
  }
}

TEST(Suite, ReportsAreByteIdenticalAcrossRuns) {
  const auto fx = testing::fixture_dir() / "smoke";
  const auto m = parse_manifest(read_file(fx / "manifest.json"), fx);
  std::string csv, json;
  for (int run = 0; run < 2; ++run) {
    BuiltinBackend backend(64, fx);
    EvalContext ctx;
    ctx.backend = &backend;
    ctx.image_root = fx;
    const auto s = evaluate_suite(m, ctx);
    ASSERT_EQ(s.rows.size(), 1U);
    EXPECT_EQ(s.rows[0].n_queries, 50U);
    if (run == 0) {
      csv = suite_csv(s);
      json = suite_json(s);
    } else {
      EXPECT_EQ(suite_csv(s), csv);
      EXPECT_EQ(suite_json(s), json);
    }
  }
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "dataset,task,n,hit@1,hit@5,hit@10,ndcg@10,mrr,recall@10,fingerprint");
}

TEST(Suite, MergedPoolsAreNoEasier) {
  std::mt19937_64 rng(6);
  TempDir dir;
  std::string manifest = "[";
  for (int t = 0; t < 2; ++t) {
    std::ofstream out(dir / ("t" + std::to_string(t) + ".jsonl"));
    for (int i = 0; i < 20; ++i) {
      out << R"({"qry_text":")" << words(rng, 4) << R"(","qry_img_path":null,"tgt_text":")" << words(rng, 4)
          << R"(","tgt_img_path":null})" << "\n";
    }
    manifest += std::string(t ? "," : "") + R"({"dataset":"d)" + std::to_string(t) +
                R"(","task":"qc→rc","file":"t)" + std::to_string(t) + R"(.jsonl"})";
  }
  manifest += "]";
  const auto m = parse_manifest(manifest, dir.path());
  BuiltinBackend backend(32);
  EvalContext ctx;
  ctx.backend = &backend;
  const auto per = evaluate_suite(m, ctx, PoolMode::kPerTask);
  const auto merged = evaluate_suite(m, ctx, PoolMode::kMerged);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t q = 0; q < 20; ++q) ASSERT_GE(*merged.rows[i].ranks[q], *per.rows[i].ranks[q]);
  }
}

TEST(Ablation, ItemsThatFitGiveIdenticalReports) {
  std::mt19937_64 rng(7);
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < 30; ++i) pairs.push_back(code_pair(words(rng, 5), words(rng, 5), i));
  BuiltinBackend backend(64);
  EvalContext ctx;
  ctx.backend = &backend;
  const std::vector<std::size_t> budgets = {128, 256, 512};
  const auto rows = length_ablation(pairs, ctx, budgets);
  ASSERT_EQ(rows.size(), 3U);
  for (const auto& r : rows) {
    EXPECT_EQ(r.ranks, rows[0].ranks);
    EXPECT_EQ(r.hit_at, rows[0].hit_at);
  }
  EXPECT_EQ(rows[2].token_budget, 512U);
  const std::string csv = ablation_csv(rows);
  EXPECT_EQ(csv.substr(0, 7), "budget,");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(code_of([&] { length_ablation(pairs, ctx, std::vector<std::size_t>{}); }), ErrorCode::kInvalidArgument);
}

TEST(Ablation, PlantedPositionRewardsTheLongerBudget) {
  const auto pairs = planted_position_dataset();
  BuiltinBackend backend(256);
  EvalContext ctx;
  ctx.backend = &backend;
  const std::vector<std::size_t> budgets = {128, 256, 512};
  const auto rows = length_ablation(pairs, ctx, budgets);
  EXPECT_GT(rows[2].hit_at.at(1), rows[1].hit_at.at(1));
  EXPECT_GT(rows[2].ndcg_at.at(10), rows[1].ndcg_at.at(10));
  EXPECT_NE(rows[1].config_fingerprint, rows[2].config_fingerprint);
}

}  // namespace
}  // namespace mmcoir
