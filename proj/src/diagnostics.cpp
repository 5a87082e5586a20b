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

#include "forge/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "forge/error.hpp"

namespace forge {

double compute_asr(const Classifier& model, const LabeledImageSet& triggered) {
  if (!triggered.has_source_labels()) {
    throw ValidationError("ASR needs a triggered set that keeps its source labels");
  }
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < triggered.size(); ++i) {
    if (triggered.source_labels[i] == triggered.labels[i]) continue;
    ++total;
    if (model.predict(triggered.image(i)) == triggered.labels[i]) ++hits;
  }
  if (total == 0) throw ValidationError("ASR is undefined: no sample has a target different from its label");
  return static_cast<double>(hits) / static_cast<double>(total);
}

LabelHistogram::LabelHistogram(int k) : classes(k), counts(static_cast<std::size_t>(k) * k, 0) {}

std::uint64_t LabelHistogram::row_total(int row) const {
  std::uint64_t s = 0;
  for (int c = 0; c < classes; ++c) s += count(row, c);
  return s;
}

double LabelHistogram::frequency(int row, int col) const {
  const auto total = row_total(row);
  return total == 0 ? 0.0 : static_cast<double>(count(row, col)) / static_cast<double>(total);
}

double LabelHistogram::row_max_frequency(int row) const {
  double best = 0.0;
  for (int c = 0; c < classes; ++c) best = std::max(best, frequency(row, c));
  return best;
}

void LabelHistogram::merge(const LabelHistogram& other) {
  if (other.classes != classes) throw ValidationError("cannot merge histograms with different class counts");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

LabelHistogram adv_target_histogram(const Classifier& model, const LabeledImageSet& clean,
                                    const AdvConfig& cfg, const PoisonPlan& plan) {
  const int k = model.num_classes();
  plan.validate(k);
  if (clean.class_count != k) throw ValidationError("dataset and model class counts differ");
  LabelHistogram hist(k);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const int y = clean.labels[i];
    const int row = plan.target_for(y, k);
    if (row == y) continue;
    const auto adv = attack_untargeted(model, clean.image(i), y, cfg, i);
    hist.counts[static_cast<std::size_t>(row) * k + model.predict(adv)] += 1;
  }
  return hist;
}

namespace {

double l2_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

FeatureDistanceReport feature_distances(const Network& benign, const Network& infected,
                                        const LabeledImageSet& clean, const TriggerSpec& trigger,
                                        const AdvConfig& cfg) {
  if (benign.feature_size() != infected.feature_size() || benign.input_size() != infected.input_size()) {
    throw ValidationError("benign and infected models expose different feature shapes");
  }
  if (clean.empty()) throw ValidationError("feature distances need at least one sample");
  FeatureDistanceReport report;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const auto x = clean.image(i);
    const int y = clean.labels[i];
    const auto triggered = infected.features(trigger.apply(x));
    const auto adv_benign = attack_untargeted(benign, x, y, cfg, i);
    const auto adv_infected = attack_untargeted(infected, x, y, cfg, i);
    report.benign += l2_distance(infected.features(adv_benign), triggered);
    report.infected += l2_distance(infected.features(adv_infected), triggered);
  }
  report.samples = clean.size();
  report.benign /= static_cast<double>(report.samples);
  report.infected /= static_cast<double>(report.samples);
  return report;
}

PrCurve precision_recall_ap(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  if (scores.size() != positive.size()) throw DimensionError("scores and ground-truth mask differ in length");
  const auto total_pos = static_cast<std::size_t>(std::count_if(positive.begin(), positive.end(),
                                                                [](std::uint8_t v) { return v != 0; }));
  if (total_pos == 0) throw ValidationError("precision/recall needs at least one positive sample");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  PrCurve curve;
  std::size_t tp = 0, seen = 0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    const double t = scores[order[k]];
    // Consume the whole tie group before emitting a point.
    while (k < order.size() && scores[order[k]] == t) {
      if (positive[order[k]]) ++tp;
      ++seen;
      ++k;
    }
    const double p = static_cast<double>(tp) / static_cast<double>(seen);
    const double r = static_cast<double>(tp) / static_cast<double>(total_pos);
    curve.thresholds.push_back(t);
    curve.precision.push_back(p);
    curve.recall.push_back(r);
    curve.average_precision += (r - prev_recall) * p;
    prev_recall = r;
  }
  return curve;
}

}  // namespace forge
