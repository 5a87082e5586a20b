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

#ifndef FORGE_POISON_HPP_
#define FORGE_POISON_HPP_

#include <cstdint>
#include <string>
#include <string_view>

#include "forge/dataset.hpp"
#include "forge/trigger.hpp"
#include "json.hpp"

namespace forge {

enum class TargetMode { all_to_one, all_to_all };

struct PoisonPlan {
  TargetMode mode = TargetMode::all_to_one;
  int target = 0;  // used by all_to_one only
  double ratio = 0.1;
  std::uint64_t seed = 0;
  // Trigger without relabeling; candidates are restricted to the target class.
  bool clean_label = false;

  // Attack target for a sample of true class `y`: the fixed target, or
  // (y + 1) mod K.
  int target_for(int y, int class_count) const;

  void validate(int class_count) const;

  // "all2one:<l>" or "all2all".
  static PoisonPlan parse_mode(std::string_view mode);
  std::string mode_string() const;

  nlohmann::json to_json() const;
  static PoisonPlan from_json(const nlohmann::json& j);
};

// Triggers and relabels exactly round(ratio * N) samples chosen by the plan's
// seed. Unselected samples are copied bit for bit. The result carries a
// poison mask marking the selected samples.
LabeledImageSet poison_dataset(const LabeledImageSet& clean, const TriggerSpec& trigger,
                               const PoisonPlan& plan);

// Triggers every test sample and replaces its label by the attack target;
// the original labels move to `source_labels`.
LabeledImageSet make_triggered_testset(const LabeledImageSet& clean, const TriggerSpec& trigger,
                                       const PoisonPlan& plan);

}  // namespace forge

#endif  // FORGE_POISON_HPP_
