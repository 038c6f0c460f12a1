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


#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mmcoir/corpus.hpp"

namespace mmcoir {

struct SyntheticData {
  std::vector<TrainingPair> train;
  std::vector<EvalPair> eval;
};

/// Text+code queries against code targets. Every query carries the same long
/// text preamble, which dominates its raw embedding, plus a code part that
/// shares a set of planted words with its own target only. Raw retrieval is
/// near chance; a head that suppresses the preamble direction recovers the
/// planted match.
struct PlantedFeatureOptions {
  std::size_t train_pairs = 512;
  std::size_t eval_pairs = 512;
  std::size_t planted_words = 15;
  std::size_t noise_words = 25;
  std::size_t word_len = 5;
  /// Preamble: one random token of preamble_chars letters, repeated.
  std::size_t preamble_chars = 6000;
  std::size_t preamble_repeats = 3;
  std::uint64_t seed = 7;
};

SyntheticData planted_feature_dataset(const PlantedFeatureOptions& opts = {});

/// Code queries whose discriminative words start at unit \p position of the
/// serialized query; everything before is per-query random filler. Targets
/// are the discriminative words alone, so a budget that cuts before
/// \p position leaves nothing to match on.
struct PlantedPositionOptions {
  std::size_t pairs = 200;
  std::size_t position = 300;
  std::size_t discriminative_words = 40;
  std::size_t word_len = 5;
  std::uint64_t seed = 11;
};

std::vector<EvalPair> planted_position_dataset(const PlantedPositionOptions& opts = {});

/// Random lowercase word built from SeededRng output.
std::string random_word(class SeededRng& rng, std::size_t len);

}  // namespace mmcoir
