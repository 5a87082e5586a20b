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

// Declarative experiments: poison -> train -> measure -> defend -> measure.
//
// A run directory holds config.json, record.json and the purified
// checkpoint. Trained infected models are cached under the cache directory
// keyed by a hash of the configuration fields that determine them, so runs
// that differ only in the defense share one training stage.

#ifndef FORGE_EXPERIMENT_HPP_
#define FORGE_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forge/attack.hpp"
#include "forge/dataset.hpp"
#include "forge/diagnostics.hpp"
#include "forge/pbe.hpp"
#include "forge/poison.hpp"
#include "forge/training.hpp"
#include "forge/trigger.hpp"
#include "json.hpp"

namespace forge {

enum class DefenseKind { none, pbe, pbe_with_clean, baseline_finetune };

std::string_view to_string(DefenseKind kind);
// "none" | "pbe" | "pbe_with_clean" | "baseline" / "baseline_finetune"
DefenseKind parse_defense(std::string_view name);

// Environment variable naming the directory that holds the CIFAR-10 batches.
inline constexpr const char* kDataRootEnv = "FORGE_DATA_ROOT";

struct DataSourceConfig {
  std::string source = "synthetic";  // "synthetic" | "cifar10"
  std::size_t train_size = 20000;
  std::size_t test_size = 2000;
  std::uint64_t seed = 1;  // synthetic only; the test split uses mix_seed(seed, 1)
  float noise = 0.05f;
  float min_contrast = 0.3f;
  std::string root;  // cifar10; empty falls back to $FORGE_DATA_ROOT

  void validate() const;
  nlohmann::json to_json() const;
  static DataSourceConfig from_json(const nlohmann::json& j);
};

struct Splits {
  LabeledImageSet train;
  LabeledImageSet test;
};

Splits load_splits(const DataSourceConfig& cfg);

// Short trigger description; the image shape comes from the data.
struct TriggerRecipe {
  std::string kind = "blend";  // badnets | blend | sig
  int patch_size = 3;
  float patch_value = 1.0f;
  float alpha = 0.15f;
  std::uint64_t pattern_seed = 5;
  int cell = 1;
  float amplitude = 20.0f / 255.0f;
  float frequency = 6.0f;

  TriggerSpec build(ImageShape shape) const;
  void validate() const;
  nlohmann::json to_json() const;
  static TriggerRecipe from_json(const nlohmann::json& j);
};

struct ExperimentConfig {
  std::string name = "experiment";
  DataSourceConfig data;
  TriggerRecipe trigger;
  PoisonPlan poison;
  std::string arch = "cnn:8,16/leak=0.1";
  TrainConfig train;
  DefenseKind defense = DefenseKind::pbe;
  PbeConfig pbe;                       // defense without a clean extra set
  PurifyConfig clean_extra_purify;     // pbe_with_clean
  TrainConfig baseline;                // baseline fine-tuning on the clean extra set
  double clean_extra_fraction = 0.05;  // of the clean training samples
  std::uint64_t clean_extra_seed = 99;
  std::filesystem::path output_dir = "runs/experiment";

  // Desk-scale protocol for one attack.
  static ExperimentConfig desk(std::string_view attack, DefenseKind defense);

  void validate() const;
  // Every field except output_dir.
  nlohmann::json to_json() const;
  // Fields absent from `j` come from desk(trigger.kind, defense).
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // FNV-1a of the canonical JSON (sorted keys, no whitespace).
  std::string hash() const;
  // Hash of the fields that determine the infected model.
  std::string training_hash() const;
};

struct StageRecord {
  std::string name;
  double seconds = 0.0;
  bool cached = false;
  std::string artifact;  // checkpoint directory, when the stage produced one
};

struct RunRecord {
  std::string name;
  std::string config_hash;
  nlohmann::json config;  // as hashed
  std::string defense;
  std::vector<StageRecord> stages;
  std::optional<double> before_acc;
  std::optional<double> before_asr;
  std::optional<double> after_acc;
  std::optional<double> after_asr;
  std::vector<IterationReport> timeline;  // one entry per PBE iteration
  std::vector<PrCurve> pr_curves;         // clean-positive ranking curve per iteration
  std::string failed_stage;               // empty when the run completed
  std::string error;

  bool complete() const { return failed_stage.empty() && after_acc.has_value(); }
  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

struct RunOptions {
  std::filesystem::path cache_dir;  // empty: <output_dir>/cache
  bool force = false;               // ignore cached stages
  std::function<void(const std::string&)> log;
};

// Runs every stage and persists the record after each one. A failing stage
// raises StageError naming it; record.json keeps the completed stages.
RunRecord run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

struct GridCell {
  std::string attack;
  DefenseKind defense = DefenseKind::none;
  RunRecord record;
};

struct GridResult {
  std::vector<GridCell> cells;
};

// {"base": <config>, "per_attack": {"badnets": <patch>, ...}}. Each cell is
// the base config with the attack's JSON merge patch applied, the trigger
// kind and the defense set.
nlohmann::json desk_grid_spec();
ExperimentConfig grid_cell_config(const nlohmann::json& spec, std::string_view attack, DefenseKind defense);

inline constexpr std::string_view kGridAttacks[] = {"badnets", "blend", "sig"};
inline constexpr DefenseKind kGridDefenses[] = {DefenseKind::pbe, DefenseKind::pbe_with_clean,
                                                DefenseKind::baseline_finetune};

// The 3x3 grid, one run directory per cell below `out`, sharing one cache.
GridResult run_grid(const nlohmann::json& spec, const std::filesystem::path& out,
                    const RunOptions& options = {});

}  // namespace forge

#endif  // FORGE_EXPERIMENT_HPP_
