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

#ifndef FORGE_ATTACK_HPP_
#define FORGE_ATTACK_HPP_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "forge/dataset.hpp"
#include "forge/network.hpp"
#include "json.hpp"

namespace forge {

enum class Norm { l2, linf };

Norm parse_norm(std::string_view name);  // "l2" | "linf"
std::string_view to_string(Norm norm);

// Untargeted projected gradient ascent on the cross-entropy of the true label.
//
// The iterate starts at a uniform random point of the ball (when
// `random_start` is set and steps > 1; a single-step attack always starts at
// x), takes `steps` ascent steps of size `step_size` (signed gradient for
// linf, normalized gradient for l2), and after every step is projected onto
// the epsilon-ball around x and then clipped to [0,1]. The returned image is
// the visited point (including x itself) with the highest loss.
struct AdvConfig {
  Norm norm = Norm::linf;
  float epsilon = 8.0f / 255.0f;
  float step_size = 2.0f / 255.0f;
  int steps = 10;
  std::uint64_t seed = 0;
  bool random_start = true;

  void validate() const;
  nlohmann::json to_json() const;
  static AdvConfig from_json(const nlohmann::json& j);
};

// Projects `candidate` onto {z : ||z - x||_p <= eps} and then onto [0,1]^d.
// Clipping to the box can only shrink |z - x| per coordinate, so the result
// satisfies both constraints.
void project(std::span<float> candidate, std::span<const float> x, Norm norm, float epsilon);

struct AttackResult {
  std::vector<float> image;
  float clean_loss = 0.0f;
  float best_loss = 0.0f;
  std::vector<float> step_losses;  // loss after each step, before best selection
};

// `stream` decorrelates the random start across samples of one batch.
AttackResult attack_untargeted_traced(const Classifier& model, std::span<const float> x, int y,
                                      const AdvConfig& cfg, std::uint64_t stream = 0);

std::vector<float> attack_untargeted(const Classifier& model, std::span<const float> x, int y,
                                     const AdvConfig& cfg, std::uint64_t stream = 0);

// Attacks every sample with its own label; labels (and mask/source labels)
// are carried over unchanged. Errors name the failing sample index.
LabeledImageSet attack_batch(const Classifier& model, const LabeledImageSet& data,
                             const AdvConfig& cfg);

}  // namespace forge

#endif  // FORGE_ATTACK_HPP_
