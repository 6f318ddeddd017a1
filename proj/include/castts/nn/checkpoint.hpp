// Copyright 2026 castts Authors
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
#include <string>
#include <vector>

#include "castts/nn/modules.hpp"

namespace castts::nn {

/// Checkpoints carry a format version and the fingerprint of the config
/// section that shaped the parameters; loading verifies both.
void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<Parameter*>& params,
                     std::uint64_t config_hash);
void load_checkpoint(const std::filesystem::path& path,
                     const std::vector<Parameter*>& params,
                     std::uint64_t expected_config_hash);

/// Mid-run training state: Adam moments, step count, data RNG — everything
/// needed so resuming reproduces the exact continuation.
void save_train_state(const std::filesystem::path& path, const Adam& opt,
                      std::int64_t iteration, const Rng& data_rng,
                      const Rng& dropout_rng);
void load_train_state(const std::filesystem::path& path, Adam& opt,
                      std::int64_t* iteration, Rng* data_rng,
                      Rng* dropout_rng);

}  // namespace castts::nn
