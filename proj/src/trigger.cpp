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

#include "forge/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "forge/error.hpp"

namespace forge {

using nlohmann::json;

std::string_view to_string(TriggerKind kind) {
  switch (kind) {
    case TriggerKind::patch:
      return "patch";
    case TriggerKind::blend:
      return "blend";
    case TriggerKind::sinusoid:
      return "sig";
    case TriggerKind::additive:
      return "additive";
  }
  return "unknown";
}

TriggerKind parse_trigger_kind(std::string_view name) {
  if (name == "patch" || name == "badnets" || name == "badnet") return TriggerKind::patch;
  if (name == "blend") return TriggerKind::blend;
  if (name == "sig" || name == "sinusoid") return TriggerKind::sinusoid;
  if (name == "additive") return TriggerKind::additive;
  throw ValidationError("unknown trigger kind '" + std::string(name) + "'");
}

TriggerSpec::TriggerSpec(ImageShape shape, Params params)
    : shape_(shape), params_(std::move(params)) {
  validate();
}

TriggerSpec TriggerSpec::badnets(ImageShape shape, int size, float value) {
  PatchTrigger p;
  p.height = size;
  p.width = size;
  p.top = shape.height - size;
  p.left = shape.width - size;
  p.block.assign(static_cast<std::size_t>(shape.channels) * size * size, value);
  return TriggerSpec(shape, std::move(p));
}

TriggerSpec TriggerSpec::blend_noise(ImageShape shape, std::uint64_t pattern_seed, float alpha, int cell) {
  if (cell < 1) throw ValidationError("blend pattern cell must be >= 1");
  std::mt19937_64 rng(pattern_seed);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  const int gh = (shape.height - 1) / cell + 2, gw = (shape.width - 1) / cell + 2;
  std::vector<float> grid(static_cast<std::size_t>(shape.channels) * gh * gw);
  for (auto& v : grid) v = unit(rng);
  BlendTrigger b;
  b.alpha = alpha;
  b.pattern.resize(shape.size());
  for (int c = 0; c < shape.channels; ++c) {
    const float* g = grid.data() + static_cast<std::size_t>(c) * gh * gw;
    for (int i = 0; i < shape.height; ++i) {
      const int gi = i / cell;
      const float fy = static_cast<float>(i % cell) / static_cast<float>(cell);
      for (int j = 0; j < shape.width; ++j) {
        const int gj = j / cell;
        const float fx = static_cast<float>(j % cell) / static_cast<float>(cell);
        const float top = g[gi * gw + gj] * (1 - fx) + g[gi * gw + gj + 1] * fx;
        const float bot = g[(gi + 1) * gw + gj] * (1 - fx) + g[(gi + 1) * gw + gj + 1] * fx;
        b.pattern[(static_cast<std::size_t>(c) * shape.height + i) * shape.width + j] = top * (1 - fy) + bot * fy;
      }
    }
  }
  return TriggerSpec(shape, std::move(b));
}

TriggerSpec TriggerSpec::sig(ImageShape shape, float amplitude, float frequency) {
  return TriggerSpec(shape, SinusoidTrigger{amplitude, frequency});
}

TriggerSpec TriggerSpec::additive(ImageShape shape, std::vector<float> pattern) {
  return TriggerSpec(shape, AdditiveTrigger{std::move(pattern)});
}

TriggerKind TriggerSpec::kind() const {
  return static_cast<TriggerKind>(params_.index());
}

void TriggerSpec::validate() const {
  if (shape_.channels <= 0 || shape_.height <= 0 || shape_.width <= 0) {
    throw DimensionError("trigger image shape must be positive");
  }
  std::visit(
      [this](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PatchTrigger>) {
          if (p.height <= 0 || p.width <= 0 || p.top < 0 || p.left < 0 ||
              p.top + p.height > shape_.height || p.left + p.width > shape_.width) {
            throw DimensionError("patch trigger does not fit inside the image");
          }
          if (p.block.size() != static_cast<std::size_t>(shape_.channels) * p.height * p.width) {
            throw DimensionError("patch block must hold C*h*w values");
          }
        } else if constexpr (std::is_same_v<T, BlendTrigger>) {
          if (!(p.alpha >= 0.0f && p.alpha <= 1.0f)) {
            throw ValidationError("blend alpha must lie in [0,1]");
          }
          if (p.pattern.size() != shape_.size()) {
            throw DimensionError("blend pattern must match the image shape");
          }
        } else if constexpr (std::is_same_v<T, SinusoidTrigger>) {
          if (!std::isfinite(p.amplitude) || !std::isfinite(p.frequency)) {
            throw ValidationError("sinusoid parameters must be finite");
          }
        } else {
          if (p.pattern.size() != shape_.size()) {
            throw DimensionError("additive pattern must match the image shape");
          }
        }
      },
      params_);
}

void TriggerSpec::apply(std::span<const float> x, std::span<float> out) const {
  if (x.size() != shape_.size() || out.size() != shape_.size()) {
    throw DimensionError("trigger applied to an image of the wrong size");
  }
  const int C = shape_.channels, H = shape_.height, W = shape_.width;
  if (x.data() != out.data()) std::copy(x.begin(), x.end(), out.begin());

  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PatchTrigger>) {
          std::size_t k = 0;
          for (int c = 0; c < C; ++c)
            for (int i = 0; i < p.height; ++i)
              for (int j = 0; j < p.width; ++j)
                out[(static_cast<std::size_t>(c) * H + p.top + i) * W + p.left + j] = p.block[k++];
        } else if constexpr (std::is_same_v<T, BlendTrigger>) {
          for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = (1.0f - p.alpha) * out[i] + p.alpha * p.pattern[i];
        } else if constexpr (std::is_same_v<T, SinusoidTrigger>) {
          for (int j = 0; j < W; ++j) {
            const float s = p.amplitude *
                            static_cast<float>(std::sin(2.0 * std::numbers::pi * p.frequency * j / W));
            for (int c = 0; c < C; ++c)
              for (int i = 0; i < H; ++i) out[(static_cast<std::size_t>(c) * H + i) * W + j] += s;
          }
        } else {
          for (std::size_t i = 0; i < out.size(); ++i) out[i] += p.pattern[i];
        }
      },
      params_);

  for (auto& v : out) v = std::clamp(v, 0.0f, 1.0f);
}

std::vector<float> TriggerSpec::apply(std::span<const float> x) const {
  std::vector<float> out(x.size());
  apply(x, out);
  return out;
}

json TriggerSpec::to_json() const {
  json j;
  j["kind"] = std::string(to_string(kind()));
  j["shape"] = {shape_.channels, shape_.height, shape_.width};
  std::visit(
      [&j](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PatchTrigger>) {
          j["top"] = p.top;
          j["left"] = p.left;
          j["height"] = p.height;
          j["width"] = p.width;
          j["block"] = p.block;
        } else if constexpr (std::is_same_v<T, BlendTrigger>) {
          j["alpha"] = p.alpha;
          j["pattern"] = p.pattern;
        } else if constexpr (std::is_same_v<T, SinusoidTrigger>) {
          j["amplitude"] = p.amplitude;
          j["frequency"] = p.frequency;
        } else {
          j["pattern"] = p.pattern;
        }
      },
      params_);
  return j;
}

TriggerSpec TriggerSpec::from_json(const json& j) {
  try {
    const auto dims = j.at("shape").get<std::vector<int>>();
    if (dims.size() != 3) throw DimensionError("trigger shape must have 3 entries");
    const ImageShape shape{dims[0], dims[1], dims[2]};
    switch (parse_trigger_kind(j.at("kind").get<std::string>())) {
      case TriggerKind::patch:
        return TriggerSpec(shape, PatchTrigger{j.at("top"), j.at("left"), j.at("height"), j.at("width"),
                                               j.at("block").get<std::vector<float>>()});
      case TriggerKind::blend:
        return TriggerSpec(shape, BlendTrigger{j.at("pattern").get<std::vector<float>>(), j.at("alpha")});
      case TriggerKind::sinusoid:
        return TriggerSpec(shape, SinusoidTrigger{j.at("amplitude"), j.at("frequency")});
      case TriggerKind::additive:
        return TriggerSpec(shape, AdditiveTrigger{j.at("pattern").get<std::vector<float>>()});
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed trigger description: ") + e.what());
  }
  throw ValidationError("unreachable trigger kind");
}

}  // namespace forge
