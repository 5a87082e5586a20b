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

#include "forge/poison.hpp"

#include <charconv>

#include "forge/error.hpp"

namespace forge {

using nlohmann::json;

int PoisonPlan::target_for(int y, int class_count) const {
  return mode == TargetMode::all_to_one ? target : (y + 1) % class_count;
}

void PoisonPlan::validate(int class_count) const {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ValidationError("poison ratio must lie in [0,1]");
  if (mode == TargetMode::all_to_one && (target < 0 || target >= class_count)) {
    throw ValidationError("all-to-one target " + std::to_string(target) + " outside [0, " +
                          std::to_string(class_count) + ")");
  }
  if (clean_label && mode != TargetMode::all_to_one) {
    throw ValidationError("clean-label poisoning requires an all-to-one plan");
  }
}

PoisonPlan PoisonPlan::parse_mode(std::string_view mode) {
  PoisonPlan plan;
  if (mode == "all2all") {
    plan.mode = TargetMode::all_to_all;
    return plan;
  }
  constexpr std::string_view prefix = "all2one:";
  if (mode.starts_with(prefix)) {
    const auto digits = mode.substr(prefix.size());
    int target = -1;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), target);
    if (ec == std::errc() && ptr == digits.data() + digits.size()) {
      plan.mode = TargetMode::all_to_one;
      plan.target = target;
      return plan;
    }
  }
  throw ValidationError("attack mode must be 'all2one:<label>' or 'all2all', got '" +
                        std::string(mode) + "'");
}

std::string PoisonPlan::mode_string() const {
  return mode == TargetMode::all_to_all ? "all2all" : "all2one:" + std::to_string(target);
}

json PoisonPlan::to_json() const {
  return json{{"mode", mode_string()}, {"ratio", ratio}, {"seed", seed}, {"clean_label", clean_label}};
}

PoisonPlan PoisonPlan::from_json(const json& j) {
  try {
    PoisonPlan plan = parse_mode(j.at("mode").get<std::string>());
    plan.ratio = j.value("ratio", 0.1);
    plan.seed = j.value("seed", std::uint64_t{0});
    plan.clean_label = j.value("clean_label", false);
    return plan;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed poison plan: ") + e.what());
  }
}

LabeledImageSet poison_dataset(const LabeledImageSet& clean, const TriggerSpec& trigger,
                               const PoisonPlan& plan) {
  plan.validate(clean.class_count);
  if (trigger.shape() != clean.shape) throw DimensionError("trigger shape differs from dataset shape");

  const std::size_t n = clean.size();
  const std::size_t count = fraction_count(plan.ratio, n);

  std::vector<std::size_t> chosen;
  if (plan.clean_label) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < n; ++i)
      if (clean.labels[i] == plan.target) candidates.push_back(i);
    if (count > candidates.size()) {
      throw ValidationError("clean-label plan asks for " + std::to_string(count) +
                            " samples but the target class has " + std::to_string(candidates.size()));
    }
    for (std::size_t k : sample_indices(candidates.size(), count, plan.seed)) chosen.push_back(candidates[k]);
  } else {
    chosen = sample_indices(n, count, plan.seed);
  }

  LabeledImageSet out = clean;
  out.poison_mask.assign(n, 0);
  for (std::size_t i : chosen) {
    trigger.apply(out.image(i), out.image(i));
    if (!plan.clean_label) out.labels[i] = plan.target_for(clean.labels[i], clean.class_count);
    out.poison_mask[i] = 1;
  }
  return out;
}

LabeledImageSet make_triggered_testset(const LabeledImageSet& clean, const TriggerSpec& trigger,
                                       const PoisonPlan& plan) {
  plan.validate(clean.class_count);
  if (trigger.shape() != clean.shape) throw DimensionError("trigger shape differs from dataset shape");
  LabeledImageSet out(clean.shape, clean.class_count);
  out.pixels = clean.pixels;
  out.source_labels = clean.labels;
  out.labels.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    trigger.apply(out.image(i), out.image(i));
    out.labels[i] = plan.target_for(clean.labels[i], clean.class_count);
  }
  return out;
}

}  // namespace forge
