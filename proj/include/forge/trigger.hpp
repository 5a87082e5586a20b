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

#ifndef FORGE_TRIGGER_HPP_
#define FORGE_TRIGGER_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "forge/dataset.hpp"
#include "json.hpp"

namespace forge {

enum class TriggerKind { patch, blend, sinusoid, additive };

std::string_view to_string(TriggerKind kind);
// Accepts "patch"/"badnets", "blend", "sig"/"sinusoid", "additive".
TriggerKind parse_trigger_kind(std::string_view name);

// A block of pixels stamped over the image at (top, left).
struct PatchTrigger {
  int top = 0;
  int left = 0;
  int height = 3;
  int width = 3;
  std::vector<float> block;  // C * height * width values in [0,1]
};

// x' = (1 - alpha) * x + alpha * pattern
struct BlendTrigger {
  std::vector<float> pattern;
  float alpha = 0.1f;
};

// x'[c][i][j] = x[c][i][j] + amplitude * sin(2 pi frequency j / W)
struct SinusoidTrigger {
  float amplitude = 20.0f / 255.0f;
  float frequency = 6.0f;
};

// x' = x + pattern
struct AdditiveTrigger {
  std::vector<float> pattern;
};

class TriggerSpec {
 public:
  using Params = std::variant<PatchTrigger, BlendTrigger, SinusoidTrigger, AdditiveTrigger>;

  // Validates eagerly; throws DimensionError / ValidationError.
  TriggerSpec(ImageShape shape, Params params);

  // Solid `size`x`size` block of `value` in the bottom-right corner.
  static TriggerSpec badnets(ImageShape shape, int size = 3, float value = 1.0f);
  // Blend with a smooth random pattern: uniform noise on a grid with one node
  // every `cell` pixels, bilinearly interpolated. cell = 1 gives iid noise.
  static TriggerSpec blend_noise(ImageShape shape, std::uint64_t pattern_seed, float alpha = 0.15f,
                                 int cell = 1);
  static TriggerSpec sig(ImageShape shape, float amplitude = 20.0f / 255.0f, float frequency = 6.0f);
  static TriggerSpec additive(ImageShape shape, std::vector<float> pattern);

  TriggerKind kind() const;
  const ImageShape& shape() const { return shape_; }
  const Params& params() const { return params_; }

  // Writes the triggered image to `out`, clipped to [0,1]. `x` and `out` may
  // alias.
  void apply(std::span<const float> x, std::span<float> out) const;
  std::vector<float> apply(std::span<const float> x) const;

  nlohmann::json to_json() const;
  static TriggerSpec from_json(const nlohmann::json& j);

 private:
  void validate() const;

  ImageShape shape_;
  Params params_;
};

}  // namespace forge

#endif  // FORGE_TRIGGER_HPP_
