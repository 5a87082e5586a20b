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

#ifndef FORGE_TRAINING_HPP_
#define FORGE_TRAINING_HPP_

#include <cstdint>
#include <vector>

#include "forge/dataset.hpp"
#include "forge/network.hpp"
#include "json.hpp"

namespace forge {

// Momentum SGD with step decay.
struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  float learning_rate = 0.05f;
  float momentum = 0.9f;
  float weight_decay = 5e-4f;
  int lr_step_epochs = 0;  // multiply the rate by lr_decay every this many epochs; 0 = constant
  float lr_decay = 0.1f;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
};

struct TrainResult {
  Network model;
  std::vector<EpochStats> history;
  double train_accuracy = 0.0;  // after the last epoch, on the full training set
};

// Fresh model initialized from cfg.seed, trained on `data`. The dataset is
// not modified. Bit-reproducible for fixed inputs within one build.
TrainResult train_classifier(const LabeledImageSet& data, const ArchSpec& arch,
                             const TrainConfig& cfg);

// Continues training `model` in place. Throws TrainingError on a non-finite
// loss.
std::vector<EpochStats> fine_tune(Network& model, const LabeledImageSet& data,
                                  const TrainConfig& cfg);

// Fraction of samples whose argmax prediction equals the label.
double evaluate_accuracy(const Classifier& model, const LabeledImageSet& data);

double mean_loss(const Classifier& model, const LabeledImageSet& data);

}  // namespace forge

#endif  // FORGE_TRAINING_HPP_
