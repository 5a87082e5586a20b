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

#ifndef FORGE_DIAGNOSTICS_HPP_
#define FORGE_DIAGNOSTICS_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "forge/attack.hpp"
#include "forge/dataset.hpp"
#include "forge/network.hpp"
#include "forge/poison.hpp"
#include "forge/trigger.hpp"

namespace forge {

// Attack success rate over a triggered set (see make_triggered_testset).
// Samples whose source label already equals their target are left out of
// both numerator and denominator.
double compute_asr(const Classifier& model, const LabeledImageSet& triggered);

// K x K tally of adversarial predictions. Row r collects samples whose attack
// target is r; column c counts those predicted as c.
struct LabelHistogram {
  int classes = 0;
  std::vector<std::uint64_t> counts;  // row-major K*K

  explicit LabelHistogram(int k = 0);

  std::uint64_t count(int row, int col) const { return counts[static_cast<std::size_t>(row) * classes + col]; }
  std::uint64_t row_total(int row) const;
  double frequency(int row, int col) const;  // 0 for an empty row
  // Largest frequency within the row.
  double row_max_frequency(int row) const;
  void merge(const LabelHistogram& other);
};

// Attacks every clean sample untargetedly on `model` and tabulates its
// prediction in the row of the sample's attack target under `plan`. Samples
// whose true label equals that target are skipped.
LabelHistogram adv_target_histogram(const Classifier& model, const LabeledImageSet& clean,
                                    const AdvConfig& cfg, const PoisonPlan& plan);

struct FeatureDistanceReport {
  double benign = 0.0;    // mean |f(x_adv_benign) - f(x_trigger)|
  double infected = 0.0;  // mean |f(x_adv_infected) - f(x_trigger)|
  std::size_t samples = 0;
};

// All features are read from the infected model's penultimate layer: the
// benign-model adversarial image, the infected-model adversarial image and the
// triggered image are embedded in the same feature space.
FeatureDistanceReport feature_distances(const Network& benign, const Network& infected,
                                        const LabeledImageSet& clean, const TriggerSpec& trigger,
                                        const AdvConfig& cfg);

struct PrCurve {
  std::vector<double> thresholds;  // distinct scores, descending
  std::vector<double> precision;
  std::vector<double> recall;
  double average_precision = 0.0;
};

// Precision/recall at every distinct score threshold (score >= t is predicted
// positive) and the step-wise average precision sum_k (R_k - R_{k-1}) P_k.
PrCurve precision_recall_ap(std::span<const double> scores, std::span<const std::uint8_t> positive);

}  // namespace forge

#endif  // FORGE_DIAGNOSTICS_HPP_
