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

// Progressive backdoor erasing.
//
// An infected model is purified by alternating three steps:
//   1. attack the extra set untargetedly on the current model and fine-tune
//      on the adversarial images with their original labels, then fine-tune
//      on the extra set itself;
//   2. score every training image by the cosine similarity between the
//      infected model's logits and the purified model's logits;
//   3. keep the top-scored fraction of the training set as the next extra set.
//
// With a trusted clean extra set only step 1 runs, once.
//
// Nothing in this header accepts ground-truth poison masks. Reporting code
// observes iterations through PbeObserver and brings its own ground truth.

#ifndef FORGE_PBE_HPP_
#define FORGE_PBE_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "forge/attack.hpp"
#include "forge/dataset.hpp"
#include "forge/network.hpp"
#include "forge/training.hpp"
#include "json.hpp"

namespace forge {

struct PurifyConfig {
  AdvConfig attack;
  TrainConfig adversarial_finetune;  // on the adversarial extra set
  TrainConfig clean_finetune;        // on the extra set itself

  // Five epochs per phase at learning rate 0.005 (a tenth of the default
  // training rate), no decay.
  static PurifyConfig defaults();
  void validate() const;
  nlohmann::json to_json() const;
  static PurifyConfig from_json(const nlohmann::json& j);
};

// Cosine similarity of two logit vectors. A zero-norm vector yields 0 and
// sets `degenerate`.
double prediction_change_score(std::span<const float> a, std::span<const float> b,
                               bool* degenerate = nullptr);

struct CleanRanking {
  std::vector<double> scores;             // per training sample, in [-1, 1]
  std::vector<std::size_t> order;         // descending score, ties by index
  std::vector<std::size_t> degenerate;    // samples with a zero logit vector
};

CleanRanking rank_by_scores(std::vector<double> scores);

CleanRanking rank_clean(const Classifier& infected, const Classifier& purified,
                        const LabeledImageSet& train);

// First round(fraction * N) entries of the ranking.
std::vector<std::size_t> select_extra_indices(const CleanRanking& ranking, double fraction);

// The selected samples in ranking order, carrying their training labels.
LabeledImageSet select_extra(const CleanRanking& ranking, double fraction, const LabeledImageSet& train);

// One purification round on a given extra set: adversarial fine-tuning
// followed by clean fine-tuning. `current` is not modified.
Network purify_model(const Network& current, const LabeledImageSet& extra, const PurifyConfig& cfg);

struct PbeConfig {
  int iterations = 5;
  std::vector<double> schedule{0.1, 0.2, 0.4, 0.55, 0.7};
  PurifyConfig purify = PurifyConfig::defaults();
  std::uint64_t seed = 0;  // initial random extra set and per-iteration seeds

  void validate() const;
  nlohmann::json to_json() const;
  static PbeConfig from_json(const nlohmann::json& j);
};

struct PbeState {
  int iteration = 0;
  Network model;     // current purified parameters
  Network infected;  // frozen copy of the starting model
  std::vector<std::size_t> extra_indices;  // current extra set, indices into the training set
  std::vector<double> schedule;

  // iteration 0, model == infected, extra set = seeded random sample of
  // round(schedule[0] * train_size) indices.
  static PbeState initialize(const Network& infected, std::size_t train_size,
                             const std::vector<double>& schedule, std::uint64_t seed);
  void validate(std::size_t train_size) const;
};

// purify_model on the state's current extra set.
Network purify_once(const PbeState& state, const LabeledImageSet& train, const PurifyConfig& cfg);

struct IterationReport {
  int iteration = 0;            // 1-based
  std::size_t extra_size = 0;   // size of the extra set used by this iteration
  std::optional<double> acc;
  std::optional<double> asr;
  std::optional<double> ap;
  std::optional<double> extra_clean_fraction;
};

// Called after each iteration with the new model and the ranking it produced.
// The observer may fill the optional metric fields of `report`.
using PbeObserver = std::function<void(const Network& purified, const CleanRanking& ranking,
                                       const std::vector<std::size_t>& extra_indices,
                                       IterationReport& report)>;

struct PbeResult {
  Network purified;
  std::vector<IterationReport> reports;
};

PbeResult pbe_run(const Network& infected, const LabeledImageSet& train, const PbeConfig& cfg,
                  const PbeObserver& observer = {});

// Clean-extra setting: a single purification round, no ranking.
Network pbe_with_clean_extra(const Network& infected, const LabeledImageSet& clean_extra,
                             const PurifyConfig& cfg);

// Plain fine-tuning on the clean extra set (comparison arm).
Network baseline_finetune(const Network& infected, const LabeledImageSet& clean_extra,
                          const TrainConfig& cfg);

}  // namespace forge

#endif  // FORGE_PBE_HPP_
