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


#include "mmcoir/synthetic.hpp"

#include "mmcoir/error.hpp"
#include "mmcoir/rng.hpp"
#include "mmcoir/text_units.hpp"

namespace mmcoir {

namespace {

std::string words(SeededRng& rng, std::size_t n, std::size_t len) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += random_word(rng, len);
  }
  return out;
}

}  // namespace

std::string random_word(SeededRng& rng, std::size_t len) {
  std::string w(len, 'a');
  for (char& c : w) c = static_cast<char>('a' + rng.below(26));
  return w;
}

SyntheticData planted_feature_dataset(const PlantedFeatureOptions& opts) {
  if (opts.train_pairs < 2 || opts.eval_pairs < 1 || opts.planted_words < 1 || opts.word_len < 1) {
    raise(ErrorCode::kInvalidArgument, "planted-feature sizes must be positive (at least 2 training pairs)");
  }
  SeededRng rng(opts.seed);
  const std::string token = random_word(rng, opts.preamble_chars);
  std::string preamble;
  for (std::size_t r = 0; r < opts.preamble_repeats; ++r) {
    if (r) preamble += ' ';
    preamble += token;
  }
  const std::string task = "qtc→rc";
  auto make = [&](std::string& qry, std::string& tgt) {
    const std::string planted = words(rng, opts.planted_words, opts.word_len);
    std::string q_noise = words(rng, opts.noise_words, opts.word_len);
    std::string t_noise = words(rng, opts.noise_words, opts.word_len);
    qry = preamble + "\n" + planted + (q_noise.empty() ? "" : " " + q_noise);
    tgt = (t_noise.empty() ? "" : t_noise + " ") + planted;
  };
  SyntheticData d;
  for (std::size_t i = 0; i < opts.train_pairs; ++i) {
    TrainingPair p;
    std::string tgt;
    make(p.qry, tgt);
    p.pos_text = std::move(tgt);
    p.row = i;
    p.dataset_tag = "planted-feature";
    p.task_tag = task;
    d.train.push_back(std::move(p));
  }
  for (std::size_t i = 0; i < opts.eval_pairs; ++i) {
    EvalPair e;
    std::string q, t;
    make(q, t);
    e.qry_text = std::move(q);
    e.tgt_text = std::move(t);
    e.row = i;
    e.dataset_tag = "planted-feature";
    e.task_tag = task;
    d.eval.push_back(std::move(e));
  }
  return d;
}

std::vector<EvalPair> planted_position_dataset(const PlantedPositionOptions& opts) {
  if (opts.pairs < 1 || opts.discriminative_words < 1) {
    raise(ErrorCode::kInvalidArgument, "planted-position sizes must be positive");
  }
  const Direction dir = parse_direction("qc→rc");
  const std::size_t inst_units = count_units(standard_instruction(dir).text);
  if (opts.position <= inst_units) raise(ErrorCode::kInvalidArgument, "position falls inside the instruction");
  const std::size_t filler = opts.position - inst_units;

  SeededRng rng(opts.seed);
  std::vector<EvalPair> out;
  for (std::size_t i = 0; i < opts.pairs; ++i) {
    const std::string key = words(rng, opts.discriminative_words, opts.word_len);
    EvalPair e;
    e.qry_text = words(rng, filler, opts.word_len) + " " + key;
    e.tgt_text = key;
    e.row = i;
    e.dataset_tag = "planted-position";
    e.task_tag = dir.tag();
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace mmcoir
