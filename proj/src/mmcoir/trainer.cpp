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


#include "mmcoir/trainer.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <string_view>
#include <unordered_map>

#include "mmcoir/error.hpp"
#include "mmcoir/linalg.hpp"
#include "mmcoir/rng.hpp"

namespace mmcoir {

void TrainerConfig::validate() const {
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
    raise(ErrorCode::kConfigError, "learning_rate must be finite and non-negative");
  }
  if (total_steps == 0) raise(ErrorCode::kConfigError, "total_steps must be positive");
  if (warmup_steps > total_steps) raise(ErrorCode::kConfigError, "warmup_steps exceeds total_steps");
  if (batch_size < 1) raise(ErrorCode::kConfigError, "batch_size must be positive");
  if (token_budget < 1) raise(ErrorCode::kConfigError, "token_budget must be positive");
  if (optimizer == OptimizerKind::kAdam) {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
      raise(ErrorCode::kConfigError, "Adam needs beta1, beta2 in [0, 1) and epsilon > 0");
    }
  }
}

double scheduled_lr(const TrainerConfig& cfg, std::size_t step) {
  if (step < cfg.warmup_steps) {
    return cfg.learning_rate * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  }
  if (step >= cfg.total_steps) return 0.0;
  const double span = static_cast<double>(std::max<std::size_t>(1, cfg.total_steps - cfg.warmup_steps));
  return cfg.learning_rate * static_cast<double>(cfg.total_steps - step) / span;
}

EmbeddedPairs embed_training_pairs(std::span<const TrainingPair> pairs, EmbeddingBackend& backend,
                                   std::size_t token_budget) {
  std::vector<SerializedItem> queries, positives, negatives;
  std::vector<std::size_t> neg_row;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const Direction dir = infer_train_direction(p);
    const QuerySpec q = make_query(p.qry, p.qry_img_path, dir);
    queries.push_back(compose_query(q.item, q.instruction, token_budget));
    positives.push_back(compose_target(make_target(p.pos_text, p.pos_img_path), token_budget));
    if (p.neg_text || p.neg_img_path) {
      negatives.push_back(compose_target(make_target(p.neg_text, p.neg_img_path), token_budget));
      neg_row.push_back(i);
    }
  }
  EmbeddedPairs out;
  out.queries = embed_all(backend, queries);
  out.positives = embed_all(backend, positives);
  out.negatives.resize(pairs.size());
  auto negs = embed_all(backend, negatives);
  for (std::size_t j = 0; j < negs.size(); ++j) out.negatives[neg_row[j]] = std::move(negs[j]);

  // Identical target vectors are the same target as far as training can tell.
  std::unordered_map<std::string, std::size_t> groups;
  for (const auto& v : out.positives) {
    std::string key(reinterpret_cast<const char*>(v.values.data()), v.values.size() * sizeof(float));
    out.target_group.push_back(groups.emplace(std::move(key), groups.size()).first->second);
  }
  return out;
}

std::vector<std::vector<ItemId>> mine_hard_negatives(std::span<const EmbeddingVector> queries,
                                                     const VectorIndex& corpus, std::size_t k,
                                                     std::span<const std::unordered_set<ItemId>> exclusion) {
  std::vector<std::vector<ItemId>> out(queries.size());
  if (k == 0 || corpus.size() == 0 || queries.empty()) return out;
  const std::size_t d = corpus.dim();
  const std::size_t n = corpus.size();
  std::vector<double> qm(queries.size() * d), cm(n * d);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (queries[i].dim() != d) raise(ErrorCode::kDimMismatch, "query dim does not match corpus dim");
    std::copy(queries[i].values.begin(), queries[i].values.end(), qm.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  for (std::size_t r = 0; r < n; ++r) {
    auto row = corpus.row(r);
    std::copy(row.begin(), row.end(), cm.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  std::vector<double> scores(queries.size() * n);
  gemm(false, true, queries.size(), n, d, 1.0, qm.data(), cm.data(), 0.0, scores.data());

  std::vector<Hit> cand;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    cand.clear();
    const std::unordered_set<ItemId>* skip = i < exclusion.size() ? &exclusion[i] : nullptr;
    for (std::size_t r = 0; r < n; ++r) {
      const ItemId id = corpus.ids()[r];
      if (skip && skip->count(id)) continue;
      cand.push_back(Hit{id, scores[i * n + r]});
    }
    const std::size_t take = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), ranks_before);
    for (std::size_t j = 0; j < take; ++j) out[i].push_back(cand[j].id);
  }
  return out;
}

namespace {

std::vector<std::span<const double>> as_spans(const std::vector<std::vector<double>>& rows) {
  return {rows.begin(), rows.end()};
}

std::vector<double> widen(const EmbeddingVector& v) { return {v.values.begin(), v.values.end()}; }

}  // namespace

TrainResult train_embedded(const EmbeddedPairs& data, ProjectionHead head_init, const TrainerConfig& cfg,
                           const ScoringConfig& scoring, const StepHook& hook) {
  cfg.validate();
  scoring.validate();
  const std::size_t n = data.queries.size();
  if (n < 2) raise(ErrorCode::kInvalidArgument, "training needs at least 2 pairs");
  if (data.positives.size() != n || data.target_group.size() != n) {
    raise(ErrorCode::kInvalidArgument, "embedded pairs are misaligned");
  }
  const std::size_t d_in = head_init.d_in();
  auto check_dim = [&](const EmbeddingVector& v) {
    if (v.dim() != d_in) {
      raise(ErrorCode::kDimMismatch, "embedding dim " + std::to_string(v.dim()) + " != head input dim " +
                                         std::to_string(d_in));
    }
  };

  // Double copies of every row used by the loss.
  std::vector<std::vector<double>> q_rows, t_rows;
  std::vector<std::size_t> group_row;  // representative positive row per group
  for (std::size_t i = 0; i < n; ++i) {
    check_dim(data.queries[i]);
    check_dim(data.positives[i]);
    q_rows.push_back(widen(data.queries[i]));
    t_rows.push_back(widen(data.positives[i]));
    const std::size_t g = data.target_group[i];
    if (g >= group_row.size()) group_row.resize(g + 1, n);
    if (group_row[g] == n) group_row[g] = i;
  }
  std::vector<std::ptrdiff_t> explicit_neg(n, -1);
  for (std::size_t i = 0; i < std::min(n, data.negatives.size()); ++i) {
    if (!data.negatives[i]) continue;
    check_dim(*data.negatives[i]);
    explicit_neg[i] = static_cast<std::ptrdiff_t>(t_rows.size());
    t_rows.push_back(widen(*data.negatives[i]));
  }
  const auto q_span = as_spans(q_rows);
  const auto t_span = as_spans(t_rows);

  std::vector<EmbeddingVector> group_vecs;
  std::vector<ItemId> group_ids;
  std::vector<PayloadRef> group_refs(group_row.size());
  for (std::size_t g = 0; g < group_row.size(); ++g) {
    group_vecs.push_back(data.positives[group_row[g]]);
    group_ids.push_back(g);
  }
  std::vector<std::unordered_set<ItemId>> exclusion(n);
  for (std::size_t i = 0; i < n; ++i) exclusion[i].insert(data.target_group[i]);

  TrainResult res;
  res.head = std::move(head_init);
  ProjectionHead& head = res.head;
  head.seed = cfg.seed;
  const std::size_t np = head.params().size();
  std::vector<double> m(np, 0.0), v(np, 0.0);

  const std::size_t batch = std::min(cfg.batch_size, n);
  const std::size_t per_epoch = n / batch;
  SeededRng rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::vector<std::vector<ItemId>> mined(n);
  double b1t = 1.0, b2t = 1.0;

  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    const std::size_t slot = step % per_epoch;
    if (slot == 0) {
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      rng.shuffle(order);
      if (cfg.hard_negatives > 0) {
        const auto corpus_vecs = head.project_all(Side::kTarget, group_vecs);
        const auto index = VectorIndex::build(corpus_vecs, group_ids, group_refs);
        const auto query_vecs = head.project_all(Side::kQuery, data.queries);
        mined = mine_hard_negatives(query_vecs, index, cfg.hard_negatives, exclusion);
      }
    }

    PooledBatch pb;
    std::unordered_map<std::size_t, std::size_t> pooled;  // t_rows index -> pooled slot
    auto pool_target = [&](std::size_t t) {
      auto [it, fresh] = pooled.emplace(t, pb.target_rows.size());
      if (fresh) pb.target_rows.push_back(t_span[t]);
      return it->second;
    };
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t i = order[slot * batch + b];
      pb.query_rows.push_back(q_span[i]);
      pb.positive.push_back(pool_target(i));
      std::vector<std::size_t> negs;
      for (ItemId g : mined[i]) negs.push_back(pool_target(group_row[g]));
      if (explicit_neg[i] >= 0) negs.push_back(pool_target(static_cast<std::size_t>(explicit_neg[i])));
      pb.negatives.push_back(std::move(negs));
    }

    const LossAndGrad lg = infonce_loss_and_grad(pb, head, scoring);
    if (!std::isfinite(lg.loss)) {
      raise(ErrorCode::kNonFiniteLoss, "non-finite loss at step " + std::to_string(step + 1));
    }
    const double lr = scheduled_lr(cfg, step);
    auto params = head.params();
    if (cfg.optimizer == OptimizerKind::kAdam) {
      b1t *= cfg.beta1;
      b2t *= cfg.beta2;
      for (std::size_t p = 0; p < np; ++p) {
        const double g = lg.grad[p];
        m[p] = cfg.beta1 * m[p] + (1.0 - cfg.beta1) * g;
        v[p] = cfg.beta2 * v[p] + (1.0 - cfg.beta2) * g * g;
        const double mhat = m[p] / (1.0 - b1t);
        const double vhat = v[p] / (1.0 - b2t);
        params[p] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
      }
    } else {
      for (std::size_t p = 0; p < np; ++p) params[p] -= lr * lg.grad[p];
    }
    for (double p : params) {
      if (!std::isfinite(p)) raise(ErrorCode::kNonFiniteLoss, "parameters diverged at step " + std::to_string(step + 1));
    }
    head.step = step + 1;
    res.loss_curve.push_back(lg.loss);
    if (cfg.checkpoint_dir && cfg.checkpoint_every > 0 && head.step % cfg.checkpoint_every == 0) {
      head.save(*cfg.checkpoint_dir / ("head-step" + std::to_string(head.step) + ".bin"));
    }
    if (hook) hook(head.step, head, lg.loss);
  }
  return res;
}

TrainResult train(std::span<const TrainingPair> pairs, EmbeddingBackend& backend, ProjectionHead head_init,
                  const TrainerConfig& cfg, const ScoringConfig& scoring, const StepHook& hook) {
  cfg.validate();
  if (pairs.size() < 2) raise(ErrorCode::kInvalidArgument, "training needs at least 2 pairs");
  const EmbeddedPairs data = embed_training_pairs(pairs, backend, cfg.token_budget);
  return train_embedded(data, std::move(head_init), cfg, scoring, hook);
}

std::string loss_curve_csv(std::span<const double> curve) {
  std::string out = "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i + 1, curve[i]);
    out += buf;
  }
  return out;
}

}  // namespace mmcoir
