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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "mmcoir/embedder.hpp"
#include "mmcoir/evaluation.hpp"
#include "mmcoir/infonce.hpp"
#include "mmcoir/rag.hpp"
#include "mmcoir/trainer.hpp"

namespace mmcoir {

struct HeadConfig {
  bool shared = false;
  bool bias = false;
  /// 0 means d_out = backend dim.
  std::size_t d_out = 0;
};

struct EngineConfig {
  std::filesystem::path data_root = ".";
  std::filesystem::path run_root = "runs";
  BackendConfig backend;
  ScoringConfig scoring;
  TrainerConfig trainer;
  HeadConfig head;
  RagConfig rag;
  std::vector<std::size_t> budgets = {128, 256, 512};
  PoolMode pools = PoolMode::kPerTask;
  std::uint64_t seed = 0;

  /// Throws Error(kConfigError) with the offending field.
  void validate() const;
};

/// Parses the declarative config file. Unknown keys are errors; missing
/// keys keep their defaults.
EngineConfig parse_config(std::string_view json);
EngineConfig load_config(const std::filesystem::path& path);

using EnvLookup = std::function<const char*(const char*)>;

/// Applies MMCOIR_DATA_ROOT, MMCOIR_BACKEND_URL (which also selects the
/// remote backend), and MMCOIR_SEED.
void apply_env(EngineConfig& cfg, const EnvLookup& lookup);

/// Canonical JSON snapshot; parse_config(config_json(c)) == c.
std::string config_json(const EngineConfig& cfg);

/// Digest of the canonical snapshot, 16 hex digits.
std::string config_fingerprint(const EngineConfig& cfg);

/// Creates run_root/<UTC timestamp>-<fingerprint> (suffixed when taken) and
/// writes config.json into it.
std::filesystem::path make_run_dir(const EngineConfig& cfg);

/// Resolves a relative path against data_root.
std::filesystem::path resolve_data_path(const EngineConfig& cfg, const std::filesystem::path& p);

}  // namespace mmcoir
