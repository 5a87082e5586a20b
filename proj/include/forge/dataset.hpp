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

#ifndef FORGE_DATASET_HPP_
#define FORGE_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace forge {

struct ImageShape {
  int channels = 3;
  int height = 16;
  int width = 16;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  bool operator==(const ImageShape&) const = default;
};

// A batch of CHW images with values in [0,1] and integer labels in [0, K).
//
// `poison_mask` is ground truth recorded by the poisoning step. It is used by
// reporting code only; the defense API never receives it. `source_labels`
// holds the pre-attack labels of a triggered evaluation set. Both vectors are
// either empty (absent) or have one entry per sample.
struct LabeledImageSet {
  ImageShape shape;
  int class_count = 0;
  std::vector<float> pixels;
  std::vector<int> labels;
  std::vector<std::uint8_t> poison_mask;
  std::vector<int> source_labels;

  LabeledImageSet() = default;
  LabeledImageSet(ImageShape shape, int class_count);

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  bool has_poison_mask() const { return !poison_mask.empty(); }
  bool has_source_labels() const { return !source_labels.empty(); }

  std::span<const float> image(std::size_t i) const;
  std::span<float> image(std::size_t i);

  void push_back(std::span<const float> image, int label);

  // Copies the selected samples (in the given order), carrying mask and
  // source labels along when present.
  LabeledImageSet subset(std::span<const std::size_t> indices) const;

  // Throws ValidationError/DimensionError when any invariant is violated.
  void validate() const;
};

// Uniformly samples `count` distinct indices from [0, total) and returns them
// sorted ascending. Deterministic in `seed`.
std::vector<std::size_t> sample_indices(std::size_t total, std::size_t count,
                                        std::uint64_t seed);

// round(fraction * total) computed without accumulating float error.
std::size_t fraction_count(double fraction, std::size_t total);

struct SyntheticConfig {
  std::size_t count = 1000;
  ImageShape shape{};
  int classes = 10;
  std::uint64_t seed = 0;
  float noise = 0.05f;
  float min_contrast = 0.3f;  // mean |fg - bg| over channels
};

// Ten-class "shapes" dataset: each class is a geometric figure (disk, square,
// triangle, ...) drawn at a random position and size, in a random color over
// a random shaded background. Labels are balanced (round-robin) and the
// sample order is shuffled. Supports up to 10 classes.
LabeledImageSet make_synthetic_shapes(const SyntheticConfig& config);

// Reads CIFAR-10 binary batches (`data_batch_{1..5}.bin` or
// `test_batch.bin`) from `root`. `limit` caps the number of samples read.
LabeledImageSet load_cifar10(const std::filesystem::path& root, bool train,
                             std::size_t limit);

// Directory format: `images.f32` holds N*C*H*W little-endian float32 values,
// `meta.json` holds shape, labels, optional mask/source labels and seed.
void save_dataset(const LabeledImageSet& data, const std::filesystem::path& dir,
                  std::optional<std::uint64_t> seed = std::nullopt);
LabeledImageSet load_dataset(const std::filesystem::path& dir);

}  // namespace forge

#endif  // FORGE_DATASET_HPP_
