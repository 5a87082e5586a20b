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

#include "forge/pbe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "forge/error.hpp"
#include "forge/hash.hpp"

namespace forge {

using nlohmann::json;

PurifyConfig PurifyConfig::defaults() {
  PurifyConfig c;
  c.adversarial_finetune.epochs = 5;
  c.adversarial_finetune.learning_rate = 0.005f;
  c.clean_finetune = c.adversarial_finetune;
  return c;
}

void PurifyConfig::validate() const {
  attack.validate();
  adversarial_finetune.validate();
  clean_finetune.validate();
}

json PurifyConfig::to_json() const {
  return json{{"attack", attack.to_json()},
              {"adversarial_finetune", adversarial_finetune.to_json()},
              {"clean_finetune", clean_finetune.to_json()}};
}

PurifyConfig PurifyConfig::from_json(const json& j) {
  PurifyConfig c = defaults();
  if (j.contains("attack")) c.attack = AdvConfig::from_json(j["attack"]);
  if (j.contains("adversarial_finetune")) c.adversarial_finetune = TrainConfig::from_json(j["adversarial_finetune"]);
  // Unless configured separately, the clean phase mirrors the adversarial one.
  c.clean_finetune = j.contains("clean_finetune") ? TrainConfig::from_json(j["clean_finetune"])
                                                  : c.adversarial_finetune;
  c.validate();
  return c;
}

double prediction_change_score(std::span<const float> a, std::span<const float> b, bool* degenerate) {
  if (a.size() != b.size()) throw DimensionError("logit vectors differ in length");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  if (degenerate) *degenerate = false;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

CleanRanking rank_by_scores(std::vector<double> scores) {
  CleanRanking r;
  r.scores = std::move(scores);
  r.order.resize(r.scores.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return r.scores[a] > r.scores[b]; });
  return r;
}

CleanRanking rank_clean(const Classifier& infected, const Classifier& purified, const LabeledImageSet& train) {
  if (infected.num_classes() != purified.num_classes() || infected.input_size() != purified.input_size()) {
    throw ValidationError("infected and purified models must share input size and class count");
  }
  std::vector<double> scores(train.size());
  std::vector<std::size_t> degenerate;
  for (std::size_t i = 0; i < train.size(); ++i) {
    bool flag = false;
    scores[i] = prediction_change_score(infected.logits(train.image(i)), purified.logits(train.image(i)), &flag);
    if (flag) degenerate.push_back(i);
  }
  CleanRanking r = rank_by_scores(std::move(scores));
  r.degenerate = std::move(degenerate);
  return r;
}

std::vector<std::size_t> select_extra_indices(const CleanRanking& ranking, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("selection fraction must lie in (0,1]");
  const std::size_t n = fraction_count(fraction, ranking.order.size());
  return {ranking.order.begin(), ranking.order.begin() + static_cast<std::ptrdiff_t>(n)};
}

LabeledImageSet select_extra(const CleanRanking& ranking, double fraction, const LabeledImageSet& train) {
  if (ranking.order.size() != train.size()) throw DimensionError("ranking does not cover the training set");
  const auto idx = select_extra_indices(ranking, fraction);
  return train.subset(idx);
}

Network purify_model(const Network& current, const LabeledImageSet& extra, const PurifyConfig& cfg) {
  cfg.validate();
  if (extra.empty()) throw ValidationError("extra set is empty");
  Network model = current;
  if (cfg.adversarial_finetune.epochs > 0) {
    const LabeledImageSet adversarial = attack_batch(model, extra, cfg.attack);
    fine_tune(model, adversarial, cfg.adversarial_finetune);
  }
  fine_tune(model, extra, cfg.clean_finetune);
  return model;
}

void PbeConfig::validate() const {
  if (iterations < 1) throw ValidationError("PBE needs at least one iteration");
  if (schedule.size() < static_cast<std::size_t>(iterations)) {
    throw ValidationError("selection schedule is shorter than the iteration count");
  }
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] > 0.0 && schedule[i] <= 1.0)) throw ValidationError("schedule values must lie in (0,1]");
    if (i > 0 && schedule[i] < schedule[i - 1]) throw ValidationError("schedule must be non-decreasing");
  }
  purify.validate();
}

json PbeConfig::to_json() const {
  return json{{"iterations", iterations}, {"schedule", schedule}, {"purify", purify.to_json()}, {"seed", seed}};
}

PbeConfig PbeConfig::from_json(const json& j) {
  PbeConfig c;
  try {
    c.iterations = j.value("iterations", c.iterations);
    if (j.contains("schedule")) c.schedule = j["schedule"].get<std::vector<double>>();
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed PBE config: ") + e.what());
  }
  if (j.contains("purify")) c.purify = PurifyConfig::from_json(j["purify"]);
  c.validate();
  return c;
}

PbeState PbeState::initialize(const Network& infected, std::size_t train_size,
                              const std::vector<double>& schedule, std::uint64_t seed) {
  if (schedule.empty()) throw ValidationError("selection schedule is empty");
  PbeState s{0, infected, infected, {}, schedule};
  s.extra_indices = sample_indices(train_size, fraction_count(schedule.front(), train_size), seed);
  s.validate(train_size);
  return s;
}

void PbeState::validate(std::size_t train_size) const {
  if (iteration < 0) throw ValidationError("PBE iteration must be >= 0");
  for (std::size_t i : extra_indices)
    if (i >= train_size) throw ValidationError("extra set index outside the training set");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] > 0.0 && schedule[i] <= 1.0)) throw ValidationError("schedule values must lie in (0,1]");
    if (i > 0 && schedule[i] < schedule[i - 1]) throw ValidationError("schedule must be non-decreasing");
  }
}

Network purify_once(const PbeState& state, const LabeledImageSet& train, const PurifyConfig& cfg) {
  state.validate(train.size());
  return purify_model(state.model, train.subset(state.extra_indices), cfg);
}

PbeResult pbe_run(const Network& infected, const LabeledImageSet& train, const PbeConfig& cfg,
                  const PbeObserver& observer) {
  cfg.validate();
  if (train.empty()) throw ValidationError("training set is empty");
  PbeState state = PbeState::initialize(infected, train.size(), cfg.schedule, cfg.seed);

  std::vector<IterationReport> reports;
  for (int t = 0; t < cfg.iterations; ++t) {
    PurifyConfig round = cfg.purify;
    round.attack.seed = mix_seed(cfg.purify.attack.seed, static_cast<std::uint64_t>(t));
    round.adversarial_finetune.seed = mix_seed(cfg.purify.adversarial_finetune.seed, static_cast<std::uint64_t>(t));
    round.clean_finetune.seed = mix_seed(cfg.purify.clean_finetune.seed, static_cast<std::uint64_t>(t) + 1000);

    IterationReport report;
    report.iteration = t + 1;
    report.extra_size = state.extra_indices.size();

    Network next = purify_once(state, train, round);
    const CleanRanking ranking = rank_clean(state.infected, next, train);
    if (observer) observer(next, ranking, state.extra_indices, report);
    reports.push_back(report);

    state.model = std::move(next);
    state.iteration = t + 1;
    if (t + 1 < cfg.iterations) state.extra_indices = select_extra_indices(ranking, cfg.schedule[t + 1]);
  }
  return PbeResult{std::move(state.model), std::move(reports)};
}

Network pbe_with_clean_extra(const Network& infected, const LabeledImageSet& clean_extra, const PurifyConfig& cfg) {
  return purify_model(infected, clean_extra, cfg);
}

Network baseline_finetune(const Network& infected, const LabeledImageSet& clean_extra, const TrainConfig& cfg) {
  Network model = infected;
  fine_tune(model, clean_extra, cfg);
  return model;
}

}  // namespace forge
