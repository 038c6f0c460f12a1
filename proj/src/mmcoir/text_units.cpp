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
#include "mmcoir/text_units.hpp"

namespace mmcoir {

bool is_unit_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::size_t count_units(std::string_view text) noexcept {
  std::size_t n = 0;
  bool in_unit = false;
  for (char c : text) {
    if (is_unit_space(c)) {
      in_unit = false;
    } else if (!in_unit) {
      in_unit = true;
      ++n;
    }
  }
  return n;
}

std::string_view truncate_units(std::string_view text, std::size_t budget) noexcept {
  std::size_t seen = 0;
  bool in_unit = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (is_unit_space(text[i])) {
      if (in_unit && seen == budget) return text.substr(0, i);
      in_unit = false;
    } else if (!in_unit) {
      if (seen == budget) return text.substr(0, i);
      in_unit = true;
      ++seen;
    }
  }
  return text;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_unit_space(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::string_view trim(std::string_view text) noexcept {
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && is_unit_space(text[b])) ++b;
  while (e > b && is_unit_space(text[e - 1])) --e;
  return text.substr(b, e - b);
}

}  // namespace mmcoir
