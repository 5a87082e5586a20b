/* Copyright 2026 The Forge Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef FORGE_CHECKPOINT_HPP_
#define FORGE_CHECKPOINT_HPP_

#include <filesystem>

#include "forge/network.hpp"
#include "json.hpp"

namespace forge {

inline constexpr int kCheckpointVersion = 1;

// Writes `model.bin` (magic "FRGCKPT1", u32 version, u64 count, float32
// parameters, little-endian) and `manifest.json` (architecture id, input
// shape, class count, checksum, plus the caller's `extra` fields such as seed
// and training history).
void save_checkpoint(const Network& model, const std::filesystem::path& dir,
                     const nlohmann::json& extra = nlohmann::json::object());

struct LoadedCheckpoint {
  Network model;
  nlohmann::json manifest;
};

// Throws ValidationError on a missing, truncated or mismatched checkpoint.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace forge

#endif  // FORGE_CHECKPOINT_HPP_
