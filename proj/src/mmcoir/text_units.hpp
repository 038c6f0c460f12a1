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
#include <string>
#include <string_view>
#include <vector>

namespace mmcoir {

// A budget unit is a maximal run of non-whitespace bytes (ASCII whitespace
// only; multi-byte UTF-8 sequences never contain ASCII whitespace bytes).

bool is_unit_space(char c) noexcept;

std::size_t count_units(std::string_view text) noexcept;

/// Longest prefix of `text` holding at most `budget` units. The cut lands
/// right after the last kept unit, so for b1 <= b2 the result for b1 is a
/// prefix of the result for b2. Text within budget is returned unchanged.
std::string_view truncate_units(std::string_view text, std::size_t budget) noexcept;

/// Collapse whitespace runs to one space and trim both ends.
std::string normalize_whitespace(std::string_view text);

std::string_view trim(std::string_view text) noexcept;

}  // namespace mmcoir
