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

#include "forge/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "forge/error.hpp"
#include "forge/hash.hpp"

namespace forge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'F', 'R', 'G', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(const Network& model, const fs::path& dir, const json& extra) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "model.bin", std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + (dir / "model.bin").string());
    const std::uint32_t version = kCheckpointVersion;
    const std::uint64_t count = model.parameter_count();
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(model.parameters().data()),
              static_cast<std::streamsize>(count * sizeof(float)));
  }
  json manifest = extra.is_object() ? extra : json::object();
  const auto& arch = model.arch();
  manifest["format_version"] = kCheckpointVersion;
  manifest["architecture"] = arch.id();
  manifest["classes"] = arch.classes;
  manifest["input_shape"] = {arch.input.channels, arch.input.height, arch.input.width};
  manifest["normalization"] = {{"mean", arch.mean}, {"inv_std", arch.inv_std}};
  manifest["parameter_count"] = model.parameter_count();
  manifest["checksum"] = to_hex(model.checksum());
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << manifest.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw ValidationError("missing checkpoint manifest in " + dir.string());
  json manifest;
  ArchSpec arch;
  try {
    manifest = json::parse(min);
    if (manifest.at("format_version").get<int>() != kCheckpointVersion) {
      throw ValidationError("unsupported checkpoint version");
    }
    const auto dims = manifest.at("input_shape").get<std::vector<int>>();
    if (dims.size() != 3) throw ValidationError("checkpoint input_shape must have 3 entries");
    arch = ArchSpec::parse(manifest.at("architecture").get<std::string>(),
                           ImageShape{dims[0], dims[1], dims[2]}, manifest.at("classes").get<int>());
    if (manifest.contains("normalization")) {
      arch.mean = manifest["normalization"].at("mean").get<std::vector<float>>();
      arch.inv_std = manifest["normalization"].at("inv_std").get<std::vector<float>>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint manifest: ") + e.what());
  }

  Network model(arch);
  std::ifstream in(dir / "model.bin", std::ios::binary);
  if (!in) throw ValidationError("missing model.bin in " + dir.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t count = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw ValidationError("bad checkpoint magic");
  if (version != kCheckpointVersion) throw ValidationError("unsupported checkpoint blob version");
  if (count != model.parameter_count()) throw ValidationError("checkpoint parameter count does not match architecture");
  auto params = model.parameters();
  in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<std::uint64_t>(in.gcount()) != count * sizeof(float)) throw ValidationError("truncated checkpoint");
  if (manifest.contains("checksum") && manifest["checksum"].get<std::string>() != to_hex(model.checksum())) {
    throw ValidationError("checkpoint checksum mismatch");
  }
  return LoadedCheckpoint{std::move(model), std::move(manifest)};
}

}  // namespace forge
