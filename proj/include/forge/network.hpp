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

#ifndef FORGE_NETWORK_HPP_
#define FORGE_NETWORK_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "forge/dataset.hpp"

namespace forge {

// Index of the largest value; ties go to the lowest index.
int argmax(std::span<const float> values);

// Softmax cross-entropy of `logits` against class `y`. When `dlogits` is
// non-empty it receives d loss / d logits.
float cross_entropy(std::span<const float> logits, int y, std::span<float> dlogits = {});

// Differentiable classifier over flat images in [0,1]^d. Everything the
// attack, defense and diagnostics code needs from a model.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual int num_classes() const = 0;
  virtual std::size_t input_size() const = 0;

  // Pre-softmax activations a(x).
  virtual void logits(std::span<const float> x, std::span<float> out) const = 0;

  // Returns L(x, y) and writes dL/dx to `grad`.
  virtual float loss_and_input_gradient(std::span<const float> x, int y,
                                        std::span<float> grad) const = 0;

  std::vector<float> logits(std::span<const float> x) const;
  int predict(std::span<const float> x) const;
  float loss(std::span<const float> x, int y) const;
};

// Convolutional architecture: per-channel input normalization, then a stack of
// [3x3 conv (pad 1) -> (leaky) ReLU -> 2x2 max-pool] blocks, then one linear
// head.
// The flattened output of the last block is the feature probe.
struct ArchSpec {
  ImageShape input{};
  int classes = 10;
  std::vector<int> conv_channels{8, 16};
  std::vector<float> mean;     // per input channel; empty means 0.5
  std::vector<float> inv_std;  // per input channel; empty means 4.0
  float leak = 0.0f;           // negative-side slope of the activation; 0 is ReLU

  // "cnn:8,16", or "cnn:8,16/leak=0.1" with a leaky activation. The input
  // shape and class count are stored separately in checkpoints.
  std::string id() const;
  static ArchSpec parse(const std::string& id, ImageShape input, int classes);
  void validate() const;
};

class Network final : public Classifier {
 public:
  explicit Network(ArchSpec arch);

  // He-uniform weights, zero biases.
  void initialize(std::uint64_t seed);

  const ArchSpec& arch() const { return arch_; }
  std::span<const float> parameters() const { return params_; }
  std::span<float> parameters() { return params_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::size_t feature_size() const { return feature_size_; }

  int num_classes() const override { return arch_.classes; }
  std::size_t input_size() const override { return arch_.input.size(); }
  void logits(std::span<const float> x, std::span<float> out) const override;
  float loss_and_input_gradient(std::span<const float> x, int y,
                                std::span<float> grad) const override;
  using Classifier::logits;

  // Penultimate activations (the flattened last conv block).
  std::vector<float> features(std::span<const float> x) const;

  // Adds dL/dtheta for one sample into `param_grad` and returns the loss.
  // `predicted`, when given, receives the argmax class of the forward pass.
  float accumulate_parameter_gradient(std::span<const float> x, int y,
                                      std::span<float> param_grad,
                                      int* predicted = nullptr) const;

  // FNV-1a over the raw parameter bytes.
  std::uint64_t checksum() const;

 private:
  struct Block {
    int in_channels, out_channels, height, width;  // conv input spatial size
    std::size_t weight_offset, bias_offset;
  };
  struct Workspace;

  void forward(std::span<const float> x, Workspace& ws) const;
  void backward(Workspace& ws, std::span<float> param_grad, std::span<float> input_grad) const;

  ArchSpec arch_;
  std::vector<Block> blocks_;
  std::size_t feature_size_ = 0;
  std::size_t head_weight_offset_ = 0;
  std::size_t head_bias_offset_ = 0;
  std::vector<float> params_;
};

}  // namespace forge

#endif  // FORGE_NETWORK_HPP_
