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


// Acceptance gate: one line per criterion, nonzero exit when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmcoir/commands.hpp"
#include "mmcoir/corpus.hpp"
#include "mmcoir/embedder.hpp"
#include "mmcoir/error.hpp"
#include "mmcoir/evaluation.hpp"
#include "mmcoir/infonce.hpp"
#include "mmcoir/io_util.hpp"
#include "mmcoir/metrics.hpp"
#include "mmcoir/projection_head.hpp"
#include "mmcoir/rag.hpp"
#include "mmcoir/synthetic.hpp"
#include "mmcoir/vector_index.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mmcoir {
namespace {

const fs::path kFixtures = MMCOIR_FIXTURE_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

class ScratchDir {
 public:
  ScratchDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("mmcoir-accept-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

std::vector<double> unit(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(d);
  double s = 0;
  for (double& x : v) {
    x = n(rng);
    s += x * x;
  }
  for (double& x : v) x /= std::sqrt(s);
  return v;
}

std::vector<float> unit_f(std::mt19937_64& rng, std::size_t d) {
  const auto v = unit(rng, d);
  std::vector<float> f(v.begin(), v.end());
  return l2_normalize(std::span<const float>(f));
}

EmbeddingVector as_vector(std::vector<float> v) {
  EmbeddingVector e;
  e.values = std::move(v);
  e.backend_id = "acceptance";
  return e;
}

// ---------------------------------------------------------------------------

// Independent loss in long double, evaluated on a long double copy of the
// head parameters so central differences are not limited by double roundoff.
long double oracle_loss(const TrainingBatch& b, const ProjectionHead& head, const std::vector<long double>& theta,
                        double tau) {
  const std::size_t din = head.d_in(), dout = head.d_out();
  auto proj = [&](Side side, const std::vector<double>& x) {
    const std::size_t w = head.weight_offset(side);
    std::vector<long double> z(dout, 0.0L);
    if (head.has_bias()) {
      for (std::size_t j = 0; j < dout; ++j) z[j] = theta[head.bias_offset(side) + j];
    }
    for (std::size_t i = 0; i < din; ++i) {
      for (std::size_t j = 0; j < dout; ++j) z[j] += x[i] * theta[w + i * dout + j];
    }
    long double n = 0;
    for (long double v : z) n += v * v;
    n = std::sqrt(n);
    for (long double& v : z) v /= n;
    return z;
  };
  auto dot = [](const std::vector<long double>& a, const std::vector<long double>& c) {
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * c[i];
    return s;
  };
  std::vector<std::vector<long double>> pos;
  for (const auto& p : b.positives) pos.push_back(proj(Side::kTarget, p));
  long double total = 0;
  for (std::size_t i = 0; i < b.queries.size(); ++i) {
    const auto q = proj(Side::kQuery, b.queries[i]);
    std::vector<long double> logits;
    for (const auto& p : pos) logits.push_back(dot(q, p) / tau);
    for (const auto& h : b.hard_negatives[i]) logits.push_back(dot(q, proj(Side::kTarget, h)) / tau);
    const long double m = *std::max_element(logits.begin(), logits.end());
    long double den = 0;
    for (long double l : logits) den += std::exp(l - m);
    total += m + std::log(den) - logits[i];
  }
  return total / static_cast<long double>(b.queries.size());
}

Outcome gradient_check() {
  std::mt19937_64 rng(20260101);
  const long double step = 1e-5L;
  const double floor = 1e-6;  // gradients below this count as zero (flat instances)
  double worst = 0.0;
  std::size_t checks = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t d_in = 1 + rng() % 16;
    const std::size_t d_out = 1 + rng() % 16;
    const std::size_t b = 1 + rng() % 8;
    TrainingBatch batch;
    for (std::size_t i = 0; i < b; ++i) {
      batch.queries.push_back(unit(rng, d_in));
      batch.positives.push_back(unit(rng, d_in));
      std::vector<std::vector<double>> negs;
      std::size_t n = rng() % 5;
      if (b == 1 && n == 0) n = 1;  // a lone row needs some candidate besides its positive
      for (std::size_t j = 0; j < n; ++j) negs.push_back(unit(rng, d_in));
      batch.hard_negatives.push_back(std::move(negs));
    }
    ProjectionHead head(d_in, d_out, rng() % 2, rng() % 2);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (double& p : head.params()) p = u(rng);
    std::vector<long double> theta(head.params().begin(), head.params().end());
    for (double tau : {0.02, 0.1, 1.0}) {
      const auto lg = infonce_loss_and_grad(batch, head, ScoringConfig{tau});
      double err = 0.0, scale = 0.0;
      for (std::size_t p = 0; p < theta.size(); ++p) {
        const long double keep = theta[p];
        theta[p] = keep + step;
        const long double up = oracle_loss(batch, head, theta, tau);
        theta[p] = keep - step;
        const long double down = oracle_loss(batch, head, theta, tau);
        theta[p] = keep;
        const double fd = static_cast<double>((up - down) / (2 * step));
        err = std::max(err, std::abs(fd - lg.grad[p]));
        scale = std::max({scale, std::abs(fd), std::abs(lg.grad[p])});
      }
      worst = std::max(worst, err / std::max(scale, floor));
      ++checks;
    }
  }
  return {worst <= 1e-4, std::to_string(checks) + " checks, max rel err " + fmt("%.3g", worst)};
}

Outcome loss_identities() {
  // Orthonormal inputs under the identity map: every candidate of every row
  // scores 0, so each row contributes ln(candidates).
  double worst = 0.0;
  for (std::size_t b = 1; b <= 4; ++b) {
    for (std::size_t n = 0; n <= 4; ++n) {
      if (b == 1 && n == 0) continue;
      const std::size_t d = 1 + b + b + b * n;
      std::size_t next = 0;
      auto e = [&] {
        std::vector<double> v(d, 0.0);
        v[next++] = 1.0;
        return v;
      };
      TrainingBatch batch;
      for (std::size_t i = 0; i < b; ++i) {
        batch.queries.push_back(e());
        batch.positives.push_back(e());
        std::vector<std::vector<double>> negs;
        for (std::size_t j = 0; j < n; ++j) negs.push_back(e());
        batch.hard_negatives.push_back(std::move(negs));
      }
      ProjectionHead id(d, d, true, false);
      for (std::size_t i = 0; i < d; ++i) id.params()[i * d + i] = 1.0;
      for (double tau : {0.02, 1.0}) {
        // |N| counts in-batch negatives (b - 1) plus hard negatives.
        const double want = std::log(static_cast<double>((b - 1 + n) + 1));
        worst = std::max(worst, std::abs(infonce_loss(batch, id, ScoringConfig{tau}) - want));
      }
    }
  }
  std::mt19937_64 rng(7);
  std::size_t agree = 0;
  for (int set = 0; set < 100; ++set) {
    const std::size_t d = 2 + rng() % 30;
    const auto q = unit_f(rng, d);
    std::vector<std::vector<float>> cands;
    const std::size_t m = 2 + rng() % 50;
    for (std::size_t c = 0; c < m; ++c) cands.push_back(unit_f(rng, d));
    std::vector<std::vector<std::size_t>> orders;
    for (double tau : {0.01, 0.02, 1.0, 10.0}) {
      std::vector<double> phi;
      for (const auto& c : cands) phi.push_back(similarity(q, c, tau));
      std::vector<std::size_t> o(m);
      std::iota(o.begin(), o.end(), 0);
      std::stable_sort(o.begin(), o.end(), [&](auto a, auto b2) { return phi[a] > phi[b2]; });
      orders.push_back(o);
    }
    if (std::all_of(orders.begin(), orders.end(), [&](const auto& o) { return o == orders[0]; })) ++agree;
  }
  return {worst <= 1e-12 && agree == 100,
          "max |loss - ln(|N|+1)| " + fmt("%.2g", worst) + ", " + std::to_string(agree) + "/100 rankings invariant"};
}

Outcome training_sanity() {
  ScratchDir dir;
  cmd_gen_fixtures("planted-feature", dir / "fx");
  EngineConfig cfg;  // defaults: lr 5e-5, 100 warmup, linear decay, 1000 steps
  cfg.data_root = dir / "fx";
  const auto manifest = parse_manifest(read_file(dir / "fx" / "manifest.json"), dir / "fx");
  const std::string task = manifest.at(0).task_tag;

  // The starting head, exactly as training builds it.
  const std::size_t dim = cfg.backend.dim;
  const ProjectionHead init =
      ProjectionHead::identity_init(dim, cfg.head.d_out ? cfg.head.d_out : dim, cfg.head.shared, cfg.head.bias, cfg.seed);
  init.save(dir / "init.bin");
  const auto before = cmd_eval(cfg, dir / "fx" / "manifest.json", dir / "init.bin", dir / "eval0");

  IngestOptions opts;
  opts.task_tag = task;
  const auto t0 = std::chrono::steady_clock::now();
  const auto t = cmd_train(cfg, {dir / "fx" / "train.jsonl"}, opts, dir / "train");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto after = cmd_eval(cfg, dir / "fx" / "manifest.json", t.head_path, dir / "eval1");

  const auto& r0 = before.rows.at(0);
  const auto& r1 = after.rows.at(0);
  const double chance = 1.0 / static_cast<double>(r0.n_queries);
  const double h0 = r0.hit_at.at(1), h1 = r1.hit_at.at(1);
  const bool ok = h0 <= 2 * chance && h1 >= 0.95 && t.steps <= 1000 && secs < 60.0;
  return {ok, "pool " + std::to_string(r0.n_queries) + ", Hit@1 " + fmt("%.4f", h0) + " -> " + fmt("%.4f", h1) +
                  " (2x chance " + fmt("%.4f", 2 * chance) + ") in " + std::to_string(t.steps) + " steps, train " +
                  fmt("%.1f", secs) + " s"};
}

Outcome index_exactness() {
  std::mt19937_64 rng(99);
  std::size_t mismatches = 0, roundtrip_bad = 0, queries = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const std::size_t n = 1 + rng() % 500;
    const std::size_t d = 1 + rng() % 64;
    const std::size_t k = 1 + rng() % 20;
    std::vector<EmbeddingVector> vecs;
    std::vector<ItemId> ids(n);
    std::vector<PayloadRef> refs(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i * 3 + rng() % 3;
    std::shuffle(ids.begin(), ids.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      vecs.push_back(i > 0 && rng() % 8 == 0 ? vecs[rng() % i] : as_vector(unit_f(rng, d)));
      refs[i] = PayloadRef{"t", i, ModalityMask(1)};
    }
    const VectorIndex index = VectorIndex::build(vecs, ids, refs);
    const VectorIndex back = VectorIndex::deserialize(index.serialize());
    for (int qi = 0; qi < 3; ++qi) {
      const auto q = qi == 0 ? vecs[rng() % n].values : unit_f(rng, d);
      std::vector<std::pair<double, ItemId>> all;
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += double(q[j]) * double(vecs[i].values[j]);
        all.emplace_back(-s, ids[i]);
      }
      std::sort(all.begin(), all.end());
      const auto res = index.search_topk(q, k);
      std::vector<ItemId> got, want;
      for (const auto& h : res.hits) got.push_back(h.id);
      for (std::size_t r = 0; r < std::min(k, n); ++r) want.push_back(all[r].second);
      if (got != want) ++mismatches;
      if (back.search_topk(q, k).hits != res.hits) ++roundtrip_bad;
      ++queries;
    }
  }
  return {mismatches == 0 && roundtrip_bad == 0, std::to_string(queries) + " queries over 1000 instances, " +
                                                     std::to_string(mismatches) + " oracle mismatches, " +
                                                     std::to_string(roundtrip_bad) + " roundtrip differences"};
}

Outcome metric_oracle() {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int c = 0; c < 500; ++c) {
    const std::size_t n = 1 + rng() % 100;
    std::vector<int> rel(n, 0);
    Rank rank;
    if (rng() % 5) {
      const std::size_t pos = rng() % n;
      rel[pos] = 1;
      rank = pos + 1;
    }
    const std::size_t k = 1 + rng() % 30;
    double hit = 0, dcg = 0, rr = 0, rec = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!rel[i]) continue;
      if (i < k) {
        hit = 1;
        rec += 1;
        dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
      }
      if (rr == 0) rr = 1.0 / static_cast<double>(i + 1);
    }
    worst = std::max({worst, std::abs(hit_at_k(rank, k) - hit), std::abs(ndcg_at_k(rank, k) - dcg),
                      std::abs(reciprocal_rank(rank) - rr), std::abs(recall_at_k(rank, k) - rec)});
  }
  const double nd = std::abs(ndcg_at_k(2, 10) - 1.0 / std::log2(3.0));
  return {worst <= 1e-12 && nd <= 1e-12,
          "500 cases, max diff " + fmt("%.2g", worst) + ", |ndcg(2,10) - 1/log2 3| " + fmt("%.2g", nd)};
}

Outcome schema_fidelity() {
  auto lines = [](const fs::path& p) {
    std::vector<std::string> out;
    std::ifstream in(p);
    for (std::string l; std::getline(in, l);) {
      if (!l.empty()) out.push_back(l);
    }
    return out;
  };
  std::size_t lossless = 0, total = 0;
  const auto train = lines(kFixtures / "smoke" / "train.jsonl");
  for (std::size_t i = 0; i < train.size(); ++i) {
    ++total;
    const json orig = json::parse(train[i]);
    if (orig.size() == 6 && json::parse(to_jsonl(parse_train_row(train[i], i))) == orig) ++lossless;
  }
  const auto eval = lines(kFixtures / "smoke" / "eval.jsonl");
  for (std::size_t i = 0; i < eval.size(); ++i) {
    ++total;
    const json orig = json::parse(eval[i]);
    if (orig.size() == 4 && json::parse(to_jsonl(parse_eval_row(eval[i], i))) == orig) ++lossless;
  }
  std::size_t rejected = 0, cases = 0;
  for (const auto& l : lines(kFixtures / "schema" / "image_token_violations.jsonl")) {
    ++cases;
    const json c = json::parse(l);
    const std::string row = c.at("row");
    try {
      if (c.at("kind") == "train") {
        parse_train_row(row);
      } else {
        parse_eval_row(row);
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kMalformedRow) ++rejected;
    }
  }
  const bool ok = train.size() == 50 && eval.size() == 50 && lossless == 100 && cases == 20 && rejected == 20;
  return {ok, std::to_string(lossless) + "/" + std::to_string(total) + " rows lossless, " + std::to_string(rejected) +
                  "/" + std::to_string(cases) + " violations rejected"};
}

Outcome length_ablation_harness() {
  const auto pairs = planted_position_dataset();
  BuiltinBackend backend(256);
  EvalContext ctx;
  ctx.backend = &backend;
  const std::vector<std::size_t> budgets = {128, 256, 512};
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = length_ablation(pairs, ctx, budgets);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool complete = rows.size() == 3;
  for (std::size_t i = 0; complete && i < rows.size(); ++i) {
    const auto& r = rows[i];
    complete = r.token_budget == budgets[i] && r.n_queries == pairs.size() && r.hit_at.size() == 3 &&
               r.ndcg_at.size() == 3 && r.recall_at.size() == 3 && r.ranks.size() == pairs.size();
  }
  const auto& a = rows.at(1);
  const auto& b = rows.at(2);
  const bool exceeds = b.hit_at.at(1) > a.hit_at.at(1) && b.ndcg_at.at(10) > a.ndcg_at.at(10) && b.mrr > a.mrr;
  return {complete && exceeds && secs < 30.0,
          "Hit@1 128/256/512 = " + fmt("%.3f", rows[0].hit_at.at(1)) + "/" + fmt("%.3f", a.hit_at.at(1)) + "/" +
              fmt("%.3f", b.hit_at.at(1)) + ", nDCG@10 256/512 = " + fmt("%.3f", a.ndcg_at.at(10)) + "/" +
              fmt("%.3f", b.ndcg_at.at(10)) + ", " + fmt("%.2f", secs) + " s"};
}

Outcome rag_guard() {
  IngestOptions eo;
  eo.dataset_tag = "smoke";
  eo.task_tag = "qi→rc";
  std::ifstream in(kFixtures / "smoke" / "eval.jsonl");
  const auto pairs = ingest_eval(in, eo).rows;
  std::ifstream tin(kFixtures / "smoke" / "train.jsonl");
  auto codes = CodeCorpus::codes_from_pairs(ingest_train(tin, IngestOptions{}).rows);
  for (const auto& p : pairs) codes.push_back(*p.tgt_text);  // every target verbatim
  BuiltinBackend backend(64, kFixtures / "smoke");
  const auto corpus = CodeCorpus::build("train-code", codes, backend, nullptr, 256);
  RagConfig cfg;
  cfg.k = 3;

  const auto recs = build_rag_prompts(pairs, corpus, cfg, backend, nullptr);
  const auto leaks = guard_audit(recs, cfg.guard, cfg.max_exemplar_units);
  // Without the guard the verbatim copies do get retrieved; the check is not vacuous.
  std::size_t unguarded_hits = 0;
  for (const auto& p : pairs) {
    for (const auto& e : retrieve_exemplars(rag_query(p.qry_text, p.qry_img_path), corpus, cfg, backend, nullptr)) {
      if (guard_equal(cfg.guard, e.code, *p.tgt_text)) ++unguarded_hits;
    }
  }

  // k effectively 0: the only corpus item is the target itself.
  std::size_t degenerate_equal = 0, degenerate_total = 0;
  for (const auto& p : pairs) {
    const auto solo = CodeCorpus::build("solo", {*p.tgt_text}, backend, nullptr, 256);
    RagConfig one;
    one.k = 1;
    const auto ex = retrieve_exemplars(rag_query(p.qry_text, p.qry_img_path), solo, one, backend, nullptr, p.tgt_text);
    const auto prompt = build_prompt("q", ex, one.prompt_template_id, one.max_exemplar_units);
    ++degenerate_total;
    if (ex.empty() && prompt.rendered == no_rag_prompt(one.prompt_template_id)) ++degenerate_equal;
  }
  for (const auto& id : template_ids()) {
    ++degenerate_total;
    if (build_prompt("q", {}, id, 512).rendered == no_rag_prompt(id)) ++degenerate_equal;
  }
  const bool ok = recs.size() == pairs.size() && leaks.empty() && degenerate_equal == degenerate_total;
  return {ok, std::to_string(recs.size()) + " prompts, " + std::to_string(leaks.size()) + " contain their target (" +
                  std::to_string(unguarded_hits) + " unguarded hits), " + std::to_string(degenerate_equal) + "/" +
                  std::to_string(degenerate_total) + " zero-exemplar prompts equal No-RAG"};
}

Outcome end_to_end() {
  ScratchDir dir;
  auto run = [&](const std::string& name) {
    const fs::path out = dir / name;
    EngineConfig cfg;
    cfg.data_root = kFixtures / "smoke";
    cfg.seed = cfg.trainer.seed = 2026;
    cmd_ingest(cfg, RowKind::kTrain, "train.jsonl", IngestOptions{}, out / "ingest");
    IngestOptions eo;
    eo.task_tag = "qi→rc";
    cmd_ingest(cfg, RowKind::kEval, "eval.jsonl", eo, out / "ingest");
    cmd_embed(cfg, RowKind::kEval, "eval.jsonl", "qi→rc", out / "embed");
    const auto t = cmd_train(cfg, {"train.jsonl"}, IngestOptions{}, out / "train");
    cmd_index(cfg, RowKind::kEval, "eval.jsonl", "smoke", "qi→rc", t.head_path, out / "index" / "smoke.idx");
    cmd_eval(cfg, "manifest.json", t.head_path, out / "eval");
    return out;
  };
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path a = run("a");
  const double first = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const fs::path b = run("b");

  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a));
  }
  std::sort(files.begin(), files.end());
  std::size_t same = 0;
  for (const auto& f : files) {
    if (fs::exists(b / f) && read_file(a / f) == read_file(b / f)) ++same;
  }
  std::size_t b_count = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) b_count += e.is_regular_file();
  const bool ok = first < 180.0 && same == files.size() && b_count == files.size() && !files.empty();
  return {ok, "pipeline " + fmt("%.1f", first) + " s, " + std::to_string(same) + "/" + std::to_string(files.size()) +
                  " output files byte-identical across runs"};
}

}  // namespace
}  // namespace mmcoir

int main() {
  using namespace mmcoir;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"infonce-gradient-check", gradient_check},
      {"loss-identities", loss_identities},
      {"training-sanity", training_sanity},
      {"index-exactness", index_exactness},
      {"metric-oracle", metric_oracle},
      {"schema-fidelity", schema_fidelity},
      {"length-ablation", length_ablation_harness},
      {"rag-guard", rag_guard},
      {"end-to-end-smoke", end_to_end},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %-24s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), secs, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
