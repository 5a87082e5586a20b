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

#include "forge/attack.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "forge/error.hpp"
#include "forge/hash.hpp"

namespace forge {

using nlohmann::json;

Norm parse_norm(std::string_view name) {
  if (name == "l2" || name == "2") return Norm::l2;
  if (name == "linf" || name == "inf") return Norm::linf;
  throw ValidationError("norm must be 'l2' or 'linf', got '" + std::string(name) + "'");
}

std::string_view to_string(Norm norm) { return norm == Norm::l2 ? "l2" : "linf"; }

void AdvConfig::validate() const {
  if (!(epsilon > 0.0f) || !std::isfinite(epsilon)) throw ValidationError("attack radius must be > 0");
  if (!(step_size > 0.0f) || !std::isfinite(step_size)) throw ValidationError("attack step size must be > 0");
  if (steps < 1) throw ValidationError("attack needs at least one step");
}

json AdvConfig::to_json() const {
  return json{{"norm", std::string(to_string(norm))},
              {"epsilon", epsilon},
              {"step_size", step_size},
              {"steps", steps},
              {"seed", seed},
              {"random_start", random_start}};
}

AdvConfig AdvConfig::from_json(const json& j) {
  AdvConfig c;
  try {
    c.norm = parse_norm(j.value("norm", std::string("linf")));
    c.epsilon = j.value("epsilon", c.epsilon);
    c.step_size = j.value("step_size", c.step_size);
    c.steps = j.value("steps", c.steps);
    c.seed = j.value("seed", c.seed);
    c.random_start = j.value("random_start", c.random_start);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed attack config: ") + e.what());
  }
  c.validate();
  return c;
}

void project(std::span<float> candidate, std::span<const float> x, Norm norm, float epsilon) {
  if (candidate.size() != x.size()) throw DimensionError("projection operands differ in size");
  if (norm == Norm::linf) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      candidate[i] = std::clamp(candidate[i], x[i] - epsilon, x[i] + epsilon);
    }
  } else {
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = static_cast<double>(candidate[i]) - x[i];
      sq += d * d;
    }
    const double n = std::sqrt(sq);
    if (n > epsilon) {
      const double scale = epsilon / n;
      for (std::size_t i = 0; i < x.size(); ++i) {
        candidate[i] = static_cast<float>(x[i] + (static_cast<double>(candidate[i]) - x[i]) * scale);
      }
    }
  }
  for (auto& v : candidate) v = std::clamp(v, 0.0f, 1.0f);
}

namespace {

bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float f) { return std::isfinite(f); });
}

void ascend(std::span<float> cur, std::span<const float> grad, Norm norm, float step) {
  if (norm == Norm::linf) {
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const float g = grad[i];
      cur[i] += g > 0.0f ? step : (g < 0.0f ? -step : 0.0f);
    }
    return;
  }
  double sq = 0.0;
  for (float g : grad) sq += static_cast<double>(g) * g;
  if (sq == 0.0) return;
  const double scale = step / std::sqrt(sq);
  for (std::size_t i = 0; i < cur.size(); ++i) cur[i] += static_cast<float>(grad[i] * scale);
}

}  // namespace

AttackResult attack_untargeted_traced(const Classifier& model, std::span<const float> x, int y,
                                      const AdvConfig& cfg, std::uint64_t stream) {
  cfg.validate();
  if (x.size() != model.input_size()) throw DimensionError("attack input has the wrong size");
  if (y < 0 || y >= model.num_classes()) throw ValidationError("attack label out of range");

  const std::size_t d = x.size();
  std::vector<float> cur(x.begin(), x.end());
  const bool random_start = cfg.random_start && cfg.steps > 1;
  if (random_start) {
    std::mt19937_64 rng(mix_seed(cfg.seed, stream));
    if (cfg.norm == Norm::linf) {
      std::uniform_real_distribution<float> u(-cfg.epsilon, cfg.epsilon);
      for (auto& v : cur) v += u(rng);
    } else {
      std::normal_distribution<double> g(0.0, 1.0);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::vector<double> dir(d);
      double sq = 0.0;
      for (auto& v : dir) {
        v = g(rng);
        sq += v * v;
      }
      const double radius = cfg.epsilon * std::pow(u(rng), 1.0 / static_cast<double>(d));
      const double scale = sq > 0.0 ? radius / std::sqrt(sq) : 0.0;
      for (std::size_t i = 0; i < d; ++i) cur[i] += static_cast<float>(dir[i] * scale);
    }
    project(cur, x, cfg.norm, cfg.epsilon);
  }

  AttackResult result;
  std::vector<float> grad(d);
  float cur_loss = model.loss_and_input_gradient(cur, y, grad);
  result.clean_loss = random_start ? model.loss(x, y) : cur_loss;
  if (!std::isfinite(cur_loss) || !std::isfinite(result.clean_loss)) {
    throw AttackError("non-finite loss", stream);
  }
  result.image.assign(x.begin(), x.end());
  result.best_loss = result.clean_loss;
  if (cur_loss > result.best_loss) {
    result.best_loss = cur_loss;
    result.image = cur;
  }

  for (int s = 0; s < cfg.steps; ++s) {
    if (!all_finite(grad)) throw AttackError("non-finite input gradient", stream);
    ascend(cur, grad, cfg.norm, cfg.step_size);
    project(cur, x, cfg.norm, cfg.epsilon);
    cur_loss = s + 1 < cfg.steps ? model.loss_and_input_gradient(cur, y, grad) : model.loss(cur, y);
    if (!std::isfinite(cur_loss)) throw AttackError("non-finite loss", stream);
    result.step_losses.push_back(cur_loss);
    if (cur_loss > result.best_loss) {
      result.best_loss = cur_loss;
      result.image = cur;
    }
  }
  return result;
}

std::vector<float> attack_untargeted(const Classifier& model, std::span<const float> x, int y,
                                     const AdvConfig& cfg, std::uint64_t stream) {
  return attack_untargeted_traced(model, x, y, cfg, stream).image;
}

LabeledImageSet attack_batch(const Classifier& model, const LabeledImageSet& data, const AdvConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ValidationError("cannot attack an empty set");
  LabeledImageSet out = data;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto adv = attack_untargeted(model, data.image(i), data.labels[i], cfg, i);
    std::copy(adv.begin(), adv.end(), out.image(i).begin());
  }
  return out;
}

}  // namespace forge
