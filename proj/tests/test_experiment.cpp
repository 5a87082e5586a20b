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


#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "forge/error.hpp"
#include "forge/experiment.hpp"
#include "forge/hash.hpp"
#include "forge/report.hpp"
#include "test_util.hpp"

namespace forge {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;

ExperimentConfig tiny_config(const fs::path& out, DefenseKind defense) {
  json j{{"name", "tiny"},
         {"data", {{"train_size", 300}, {"test_size", 80}}},
         {"trigger", {{"kind", "badnets"}}},
         {"arch", "cnn:4"},
         {"train", {{"epochs", 1}}},
         {"defense", std::string(to_string(defense))},
         {"pbe", {{"iterations", 2}, {"schedule", {0.1, 0.3}}}},
         {"output_dir", out.string()}};
  j["pbe"]["purify"] = {{"attack", {{"steps", 2}}}, {"adversarial_finetune", {{"epochs", 1}}}};
  j["clean_extra_purify"] = {{"adversarial_finetune", {{"epochs", 1}}}, {"clean_finetune", {{"epochs", 1}}}};
  j["baseline"] = {{"epochs", 2}};
  return ExperimentConfig::from_json(j);
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

TEST(Config, JsonRoundTripKeepsHash) {
  const auto c = ExperimentConfig::desk("sig", DefenseKind::pbe_with_clean);
  const auto back = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
}

TEST(Config, HashIgnoresOutputDirectoryAndKeyOrder) {
  auto a = ExperimentConfig::desk("blend", DefenseKind::pbe);
  auto b = a;
  b.output_dir = "/somewhere/else";
  EXPECT_EQ(a.hash(), b.hash());
  const auto from_text = ExperimentConfig::from_json(
      json::parse(R"({"defense":"pbe","trigger":{"kind":"blend"},"name":")" + a.name + "\"}"));
  EXPECT_EQ(from_text.hash(), a.hash());
}

TEST(Config, HashChangesWithEverySemanticField) {
  const auto base = ExperimentConfig::desk("blend", DefenseKind::pbe);
  std::vector<ExperimentConfig> variants(10, base);
  variants[0].data.train_size += 1;
  variants[1].trigger.alpha = 0.2f;
  variants[2].poison.seed += 1;
  variants[3].arch = "cnn:8";
  variants[4].train.epochs += 1;
  variants[5].defense = DefenseKind::none;
  variants[6].pbe.schedule[4] = 0.8;
  variants[7].clean_extra_purify.attack.epsilon *= 2.0f;
  variants[8].baseline.learning_rate *= 2.0f;
  variants[9].clean_extra_seed += 1;
  std::set<std::string> hashes{base.hash()};
  for (const auto& v : variants) hashes.insert(v.hash());
  EXPECT_EQ(hashes.size(), variants.size() + 1);
}

TEST(Config, TrainingHashIgnoresDefense) {
  const auto a = ExperimentConfig::desk("sig", DefenseKind::pbe);
  const auto b = ExperimentConfig::desk("sig", DefenseKind::baseline_finetune);
  EXPECT_EQ(a.training_hash(), b.training_hash());
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Config, PartialConfigTakesDeskValues) {
  const auto c = ExperimentConfig::from_json(json{{"trigger", {{"kind", "badnets"}}}, {"pbe", {{"iterations", 5}}}});
  const auto desk = ExperimentConfig::desk("badnets", DefenseKind::pbe);
  EXPECT_EQ(c.pbe.seed, desk.pbe.seed);
  EXPECT_EQ(c.poison.seed, desk.poison.seed);
  EXPECT_FLOAT_EQ(c.clean_extra_purify.attack.epsilon, 24.0f / 255.0f);
}

TEST(Config, RejectsInvalidInput) {
  EXPECT_THROW(ExperimentConfig::from_json(json{{"defense", "prune"}}), ValidationError);
  EXPECT_THROW(ExperimentConfig::from_json(json{{"trigger", {{"kind", "warp"}}}}), ValidationError);
  EXPECT_THROW(ExperimentConfig::from_json(json{{"clean_extra_fraction", 0.0}}), ValidationError);
  EXPECT_THROW(ExperimentConfig::from_json(json{{"data", {{"source", "imagenet"}}}}), ValidationError);
  EXPECT_THROW(ExperimentConfig::from_json(json::array()), ValidationError);
  EXPECT_THROW(ExperimentConfig::load("/nonexistent/forge.json"), ValidationError);
}

TEST(Config, GridCellAppliesAttackPatch) {
  const json spec = desk_grid_spec();
  const auto c = grid_cell_config(spec, "badnets", DefenseKind::pbe_with_clean);
  EXPECT_EQ(c.trigger.kind, "badnets");
  EXPECT_EQ(c.defense, DefenseKind::pbe_with_clean);
  EXPECT_FLOAT_EQ(c.clean_extra_purify.attack.epsilon, 24.0f / 255.0f);
  EXPECT_FLOAT_EQ(grid_cell_config(spec, "blend", DefenseKind::pbe).clean_extra_purify.attack.epsilon, 16.0f / 255.0f);
}

TEST(Run, NoDefenseRecordsOnlyPreDefenseMetrics) {
  TempDir dir("run-none");
  const auto cfg = tiny_config(dir.path() / "run", DefenseKind::none);
  const auto r = run_experiment(cfg);
  ASSERT_TRUE(r.complete());
  EXPECT_EQ(*r.after_acc, *r.before_acc);
  EXPECT_EQ(*r.after_asr, *r.before_asr);
  EXPECT_TRUE(r.timeline.empty());
  EXPECT_EQ(r.config_hash, cfg.hash());
}

TEST(Run, StoredConfigMatchesHash) {
  TempDir dir("run-hash");
  const auto cfg = tiny_config(dir.path() / "run", DefenseKind::none);
  const auto r = run_experiment(cfg);
  std::ifstream in(dir.path() / "run" / "config.json");
  const json stored = json::parse(in);
  EXPECT_EQ(to_hex(fnv1a64(stored.dump())), r.config_hash);
}

TEST(Run, RepeatIsDeterministicAndCached) {
  TempDir dir("run-repeat");
  const auto cfg = tiny_config(dir.path() / "run", DefenseKind::pbe);
  const auto first = run_experiment(cfg);
  ASSERT_EQ(first.timeline.size(), 2u);
  EXPECT_EQ(first.pr_curves.size(), 2u);

  const auto cached = run_experiment(cfg);
  EXPECT_EQ(cached.config_hash, first.config_hash);
  EXPECT_EQ(cached.after_asr, first.after_asr);
  for (const auto& s : cached.stages) EXPECT_TRUE(s.cached) << s.name;

  RunOptions force;
  force.force = true;
  const auto fresh = run_experiment(cfg, force);
  EXPECT_EQ(fresh.after_acc, first.after_acc);
  EXPECT_EQ(fresh.after_asr, first.after_asr);
  for (const auto& s : fresh.stages) EXPECT_FALSE(s.cached) << s.name;
}

TEST(Run, DefensesShareTheTrainingStage) {
  TempDir dir("run-share");
  RunOptions opts;
  opts.cache_dir = dir.path() / "cache";
  run_experiment(tiny_config(dir.path() / "a", DefenseKind::baseline_finetune), opts);
  const auto r = run_experiment(tiny_config(dir.path() / "b", DefenseKind::pbe_with_clean), opts);
  bool train_cached = false;
  for (const auto& s : r.stages) train_cached |= s.name == "train" && s.cached;
  EXPECT_TRUE(train_cached);
}

TEST(Run, FailingStageKeepsPartialRecord) {
  TempDir dir("run-fail");
  auto cfg = tiny_config(dir.path() / "run", DefenseKind::none);
  cfg.data.source = "cifar10";
  cfg.data.root = (dir.path() / "no-such-data").string();
  try {
    run_experiment(cfg);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "data");
  }
  std::ifstream in(dir.path() / "run" / "record.json");
  const auto r = RunRecord::from_json(json::parse(in));
  EXPECT_EQ(r.failed_stage, "data");
  EXPECT_FALSE(r.error.empty());
  EXPECT_FALSE(r.complete());
}

RunRecord sample_record() {
  RunRecord r;
  r.name = "sample";
  r.config_hash = "0123456789abcdef";
  r.config = json{{"k", 1}};
  r.defense = "pbe";
  r.stages.push_back({"train", 1.5, true, "/tmp/x"});
  r.before_acc = 0.9;
  r.before_asr = 0.95;
  r.after_acc = 0.88;
  r.after_asr = 0.05;
  IterationReport it;
  it.iteration = 1;
  it.extra_size = 10;
  it.acc = 0.8;
  it.asr = 0.3;
  r.timeline.push_back(it);
  r.pr_curves.push_back(PrCurve{{0.9, 0.5}, {1.0, 0.75}, {0.5, 1.0}, 0.875});
  return r;
}

TEST(Report, JsonRoundTripsTheRecord) {
  TempDir dir("report");
  const auto r = sample_record();
  const auto bundle = export_report(r, dir.path(), true);
  EXPECT_TRUE(bundle.warnings.empty());
  std::ifstream in(dir.path() / "report.json");
  const auto back = RunRecord::from_json(json::parse(in));
  EXPECT_EQ(back.to_json(), r.to_json());
  EXPECT_TRUE(fs::exists(dir.path() / "timeline.svg"));
  EXPECT_TRUE(fs::exists(dir.path() / "pr.svg"));
  const auto timeline = read_lines(dir.path() / "timeline.csv");
  ASSERT_EQ(timeline.size(), 2u);
  EXPECT_EQ(timeline[1], "1,10,0.8,0.3,,");
}

TEST(Report, EmptyRecordGivesEmptyTablesAndWarning) {
  TempDir dir("report-empty");
  const auto bundle = export_report(RunRecord{}, dir.path(), true);
  EXPECT_EQ(bundle.warnings.size(), 1u);
  EXPECT_EQ(read_lines(dir.path() / "timeline.csv").size(), 1u);
  EXPECT_EQ(read_lines(dir.path() / "pr_curves.csv").size(), 1u);
  EXPECT_EQ(read_lines(dir.path() / "stages.csv").size(), 1u);
}

TEST(Report, GridTableHasOneRowPerAttackAndPairedColumns) {
  TempDir dir("grid");
  GridResult g;
  for (std::string_view a : kGridAttacks) {
    for (DefenseKind d : kGridDefenses) {
      RunRecord r = sample_record();
      r.after_asr = d == DefenseKind::pbe ? 0.1 : 0.2;
      g.cells.push_back({std::string(a), d, r});
    }
  }
  write_grid_table(g, dir.path() / "table.csv");
  const auto lines = read_lines(dir.path() / "table.csv");
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0],
            "attack,before_acc,before_asr,pbe_acc,pbe_asr,pbe_with_clean_acc,pbe_with_clean_asr,"
            "baseline_finetune_acc,baseline_finetune_asr");
  EXPECT_EQ(lines[1], "badnets,90.00,95.00,88.00,10.00,88.00,20.00,88.00,20.00");
  EXPECT_EQ(lines[3].substr(0, 4), "sig,");
}

TEST(Report, HistogramCsvSkipsEmptyRows) {
  TempDir dir("hist");
  LabelHistogram h(3);
  h.counts[1 * 3 + 0] = 2;
  h.counts[1 * 3 + 2] = 6;
  write_histogram_csv(h, dir.path() / "h.csv");
  const auto lines = read_lines(dir.path() / "h.csv");
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[3], "1,2,6,0.75");
}

}  // namespace
}  // namespace forge
