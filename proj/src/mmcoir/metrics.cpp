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


#include "mmcoir/metrics.hpp"

#include <cmath>

namespace mmcoir {

double hit_at_k(Rank rank, std::size_t k) noexcept { return rank && *rank >= 1 && *rank <= k ? 1.0 : 0.0; }

double ndcg_at_k(Rank rank, std::size_t k) noexcept {
  if (!rank || *rank < 1 || *rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(*rank) + 1.0);
}

double reciprocal_rank(Rank rank) noexcept {
  return rank && *rank >= 1 ? 1.0 / static_cast<double>(*rank) : 0.0;
}

// One relevant target per query, so recall coincides with hit.
double recall_at_k(Rank rank, std::size_t k) noexcept { return hit_at_k(rank, k); }

}  // namespace mmcoir
