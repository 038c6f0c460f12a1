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
#include <optional>

namespace mmcoir {

/// 1-based rank of the single relevant target; nullopt when it is not in the
/// ranked list at all.
using Rank = std::optional<std::size_t>;

double hit_at_k(Rank rank, std::size_t k) noexcept;
/// Binary gain, one relevant item: 1 / log2(rank + 1) inside the cutoff.
double ndcg_at_k(Rank rank, std::size_t k) noexcept;
double reciprocal_rank(Rank rank) noexcept;
double recall_at_k(Rank rank, std::size_t k) noexcept;

}  // namespace mmcoir
