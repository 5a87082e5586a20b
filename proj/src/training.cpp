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

#include "forge/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "forge/error.hpp"
#include "forge/hash.hpp"

namespace forge {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (!(learning_rate >= 0.0f) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning rate must be a finite non-negative number");
  }
  if (!(momentum >= 0.0f && momentum < 1.0f)) throw ValidationError("momentum must lie in [0,1)");
  if (!(weight_decay >= 0.0f)) throw ValidationError("weight decay must be >= 0");
  if (lr_step_epochs < 0) throw ValidationError("lr_step_epochs must be >= 0");
}

json TrainConfig::to_json() const {
  return json{{"epochs", epochs},
              {"batch_size", batch_size},
              {"learning_rate", learning_rate},
              {"momentum", momentum},
              {"weight_decay", weight_decay},
              {"lr_step_epochs", lr_step_epochs},
              {"lr_decay", lr_decay},
              {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.lr_step_epochs = j.value("lr_step_epochs", c.lr_step_epochs);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed training config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

void check_trainable(const Network& model, const LabeledImageSet& data) {
  if (data.empty()) throw ValidationError("training set is empty");
  if (data.shape.size() != model.input_size()) throw DimensionError("dataset shape does not match the model input");
  if (data.class_count != model.num_classes()) throw ValidationError("dataset and model class counts differ");
  for (int y : data.labels)
    if (y < 0 || y >= data.class_count) throw ValidationError("label out of range");
}

}  // namespace

std::vector<EpochStats> fine_tune(Network& model, const LabeledImageSet& data, const TrainConfig& cfg) {
  cfg.validate();
  std::vector<EpochStats> history;
  if (cfg.epochs == 0) return history;
  check_trainable(model, data);

  auto params = model.parameters();
  std::vector<float> grad(params.size()), velocity(params.size(), 0.0f);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(cfg.seed, 0x5eed));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    float lr = cfg.learning_rate;
    if (cfg.lr_step_epochs > 0) lr *= std::pow(cfg.lr_decay, static_cast<float>(epoch / cfg.lr_step_epochs));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0f);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        int predicted = 0;
        batch_loss += model.accumulate_parameter_gradient(data.image(i), data.labels[i], grad, &predicted);
        if (predicted == data.labels[i]) ++correct;
      }
      if (!std::isfinite(batch_loss)) throw TrainingError("non-finite training loss", epoch);
      loss_sum += batch_loss;
      const float scale = 1.0f / static_cast<float>(end - start);
      for (std::size_t p = 0; p < params.size(); ++p) {
        const float g = grad[p] * scale + cfg.weight_decay * params[p];
        velocity[p] = cfg.momentum * velocity[p] + g;
        params[p] -= lr * velocity[p];
      }
    }
    for (float v : params)
      if (!std::isfinite(v)) throw TrainingError("parameters diverged", epoch);

    // Running statistics over the epoch, measured during the updates.
    const auto n = static_cast<double>(data.size());
    history.push_back({epoch, loss_sum / n, static_cast<double>(correct) / n});
  }
  return history;
}

TrainResult train_classifier(const LabeledImageSet& data, const ArchSpec& arch, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ValidationError("training set is empty");
  Network model(arch);
  model.initialize(cfg.seed);
  check_trainable(model, data);
  auto history = fine_tune(model, data, cfg);
  const double acc = evaluate_accuracy(model, data);
  return TrainResult{std::move(model), std::move(history), acc};
}

double evaluate_accuracy(const Classifier& model, const LabeledImageSet& data) {
  if (data.empty()) throw ValidationError("cannot evaluate accuracy on an empty set");
  if (data.class_count != model.num_classes()) throw ValidationError("dataset and model class counts differ");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (model.predict(data.image(i)) == data.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double mean_loss(const Classifier& model, const LabeledImageSet& data) {
  if (data.empty()) throw ValidationError("cannot evaluate loss on an empty set");
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) s += model.loss(data.image(i), data.labels[i]);
  return s / static_cast<double>(data.size());
}

}  // namespace forge
