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

#include "forge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "forge/error.hpp"
#include "json.hpp"

namespace forge {

namespace fs = std::filesystem;
using nlohmann::json;

LabeledImageSet::LabeledImageSet(ImageShape shape, int class_count)
    : shape(shape), class_count(class_count) {}

std::span<const float> LabeledImageSet::image(std::size_t i) const {
  const std::size_t d = shape.size();
  return {pixels.data() + i * d, d};
}

std::span<float> LabeledImageSet::image(std::size_t i) {
  const std::size_t d = shape.size();
  return {pixels.data() + i * d, d};
}

void LabeledImageSet::push_back(std::span<const float> img, int label) {
  if (img.size() != shape.size()) {
    throw DimensionError("image has " + std::to_string(img.size()) +
                         " values, expected " + std::to_string(shape.size()));
  }
  pixels.insert(pixels.end(), img.begin(), img.end());
  labels.push_back(label);
}

LabeledImageSet LabeledImageSet::subset(std::span<const std::size_t> indices) const {
  LabeledImageSet out(shape, class_count);
  const std::size_t d = shape.size();
  out.pixels.reserve(indices.size() * d);
  out.labels.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= size()) throw ValidationError("subset index out of range");
    auto img = image(idx);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
    out.labels.push_back(labels[idx]);
    if (has_poison_mask()) out.poison_mask.push_back(poison_mask[idx]);
    if (has_source_labels()) out.source_labels.push_back(source_labels[idx]);
  }
  return out;
}

void LabeledImageSet::validate() const {
  if (shape.channels <= 0 || shape.height <= 0 || shape.width <= 0) {
    throw DimensionError("image shape must be positive");
  }
  if (class_count < 1) throw ValidationError("class_count must be >= 1");
  if (pixels.size() != labels.size() * shape.size()) {
    throw DimensionError("pixel buffer does not match N*C*H*W");
  }
  for (int y : labels) {
    if (y < 0 || y >= class_count) {
      throw ValidationError("label " + std::to_string(y) + " outside [0, " +
                            std::to_string(class_count) + ")");
    }
  }
  for (float v : pixels) {
    if (!(v >= 0.0f && v <= 1.0f)) throw ValidationError("pixel value outside [0,1]");
  }
  if (has_poison_mask() && poison_mask.size() != size()) {
    throw DimensionError("poison_mask length differs from sample count");
  }
  if (has_source_labels()) {
    if (source_labels.size() != size()) {
      throw DimensionError("source_labels length differs from sample count");
    }
    for (int y : source_labels) {
      if (y < 0 || y >= class_count) throw ValidationError("source label out of range");
    }
  }
}

std::vector<std::size_t> sample_indices(std::size_t total, std::size_t count,
                                        std::uint64_t seed) {
  if (count > total) throw ValidationError("cannot sample more indices than available");
  std::vector<std::size_t> all(total);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `count` slots become the sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

std::size_t fraction_count(double fraction, std::size_t total) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
}

namespace {

// Membership test for each shape class in normalized, centered coordinates.
bool inside_shape(int cls, float u, float v, float r) {
  const float au = std::fabs(u), av = std::fabs(v);
  const float rad = std::sqrt(u * u + v * v);
  const float bar = r / 3.0f;
  switch (cls) {
    case 0:  // disk
      return rad <= r;
    case 1:  // filled square
      return std::max(au, av) <= r * 0.85f;
    case 2:  // triangle, apex up
      return v >= -r && v <= r && au <= (v + r) * 0.5f;
    case 3:  // ring
      return rad <= r && rad >= r * 0.55f;
    case 4:  // plus
      return (au <= bar && av <= r) || (av <= bar && au <= r);
    case 5:  // diagonal cross
      return au <= r && av <= r &&
             (std::fabs(u - v) <= bar * 1.2f || std::fabs(u + v) <= bar * 1.2f);
    case 6:  // two horizontal bars
      return au <= r && av <= r && av >= r * 0.4f;
    case 7:  // two vertical bars
      return au <= r && av <= r && au >= r * 0.4f;
    case 8:  // diamond
      return au + av <= r;
    default:  // hollow square
      return std::max(au, av) <= r && std::max(au, av) >= r * 0.55f;
  }
}

}  // namespace

LabeledImageSet make_synthetic_shapes(const SyntheticConfig& config) {
  if (config.classes < 2 || config.classes > 10) {
    throw ValidationError("synthetic shapes supports 2..10 classes");
  }
  const ImageShape shape = config.shape;
  LabeledImageSet out(shape, config.classes);
  out.pixels.resize(config.count * shape.size());
  out.labels.resize(config.count);

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  std::normal_distribution<float> gauss(0.0f, 1.0f);

  std::vector<int> labels(config.count);
  for (std::size_t i = 0; i < config.count; ++i) labels[i] = static_cast<int>(i % config.classes);
  std::shuffle(labels.begin(), labels.end(), rng);

  const int H = shape.height, W = shape.width, C = shape.channels;
  for (std::size_t i = 0; i < config.count; ++i) {
    const int cls = labels[i];
    out.labels[i] = cls;
    const float cx = (unit(rng) - 0.5f) * 0.5f;
    const float cy = (unit(rng) - 0.5f) * 0.5f;
    const float r = 0.45f + 0.3f * unit(rng);
    const float angle = (unit(rng) - 0.5f) * 0.5f;
    const float ca = std::cos(angle), sa = std::sin(angle);

    std::vector<float> fg(C), bg(C);
    // Keep a minimum mean contrast so the figure stays visible.
    for (int attempt = 0; attempt < 64; ++attempt) {
      float contrast = 0.0f;
      for (int c = 0; c < C; ++c) {
        fg[c] = unit(rng);
        bg[c] = unit(rng);
        contrast += std::fabs(fg[c] - bg[c]);
      }
      if (contrast / static_cast<float>(C) >= config.min_contrast) break;
    }
    const float gx = (unit(rng) - 0.5f) * 0.3f;
    const float gy = (unit(rng) - 0.5f) * 0.3f;

    auto img = out.image(i);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const float px = (2.0f * (static_cast<float>(x) + 0.5f) / static_cast<float>(W)) - 1.0f;
        const float py = (2.0f * (static_cast<float>(y) + 0.5f) / static_cast<float>(H)) - 1.0f;
        const float dx = px - cx, dy = py - cy;
        const float u = ca * dx + sa * dy;
        const float v = -sa * dx + ca * dy;
        const bool on = inside_shape(cls, u, v, r);
        for (int c = 0; c < C; ++c) {
          float value = on ? fg[c] : bg[c] + gx * px + gy * py;
          value += config.noise * gauss(rng);
          img[(static_cast<std::size_t>(c) * H + y) * W + x] = std::clamp(value, 0.0f, 1.0f);
        }
      }
    }
  }
  return out;
}

LabeledImageSet load_cifar10(const fs::path& root, bool train, std::size_t limit) {
  std::vector<fs::path> files;
  if (train) {
    for (int b = 1; b <= 5; ++b) files.push_back(root / ("data_batch_" + std::to_string(b) + ".bin"));
  } else {
    files.push_back(root / "test_batch.bin");
  }
  const ImageShape shape{3, 32, 32};
  LabeledImageSet out(shape, 10);
  std::vector<unsigned char> record(1 + shape.size());
  std::vector<float> img(shape.size());
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ValidationError("cannot open CIFAR-10 batch " + file.string());
    while (out.size() < limit &&
           in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(record.size()))) {
      for (std::size_t p = 0; p < shape.size(); ++p) img[p] = static_cast<float>(record[p + 1]) / 255.0f;
      out.push_back(img, static_cast<int>(record[0]));
    }
    if (out.size() >= limit) break;
  }
  if (out.empty()) throw ValidationError("no CIFAR-10 samples found under " + root.string());
  return out;
}

void save_dataset(const LabeledImageSet& data, const fs::path& dir,
                  std::optional<std::uint64_t> seed) {
  data.validate();
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "images.f32", std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + (dir / "images.f32").string());
    out.write(reinterpret_cast<const char*>(data.pixels.data()),
              static_cast<std::streamsize>(data.pixels.size() * sizeof(float)));
  }
  json meta;
  meta["format_version"] = 1;
  meta["shape"] = {data.size(), data.shape.channels, data.shape.height, data.shape.width};
  meta["class_count"] = data.class_count;
  meta["labels"] = data.labels;
  if (data.has_poison_mask()) {
    std::vector<bool> mask(data.poison_mask.begin(), data.poison_mask.end());
    meta["poison_mask"] = mask;
  }
  if (data.has_source_labels()) meta["source_labels"] = data.source_labels;
  if (seed) meta["seed"] = *seed;
  std::ofstream out(dir / "meta.json", std::ios::trunc);
  out << meta.dump(1) << '\n';
}

LabeledImageSet load_dataset(const fs::path& dir) {
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) throw ValidationError("missing dataset sidecar " + (dir / "meta.json").string());
  json meta;
  try {
    meta = json::parse(meta_in);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed dataset sidecar: ") + e.what());
  }
  if (meta.value("format_version", 0) != 1) throw ValidationError("unsupported dataset format_version");
  const auto dims = meta.at("shape").get<std::vector<std::size_t>>();
  if (dims.size() != 4) throw DimensionError("dataset shape must have 4 entries");
  LabeledImageSet data(ImageShape{static_cast<int>(dims[1]), static_cast<int>(dims[2]),
                                  static_cast<int>(dims[3])},
                       meta.at("class_count").get<int>());
  data.labels = meta.at("labels").get<std::vector<int>>();
  if (meta.contains("poison_mask")) {
    for (bool b : meta["poison_mask"].get<std::vector<bool>>()) data.poison_mask.push_back(b ? 1 : 0);
  }
  if (meta.contains("source_labels")) data.source_labels = meta["source_labels"].get<std::vector<int>>();

  data.pixels.resize(dims[0] * data.shape.size());
  std::ifstream in(dir / "images.f32", std::ios::binary);
  if (!in) throw ValidationError("missing " + (dir / "images.f32").string());
  in.read(reinterpret_cast<char*>(data.pixels.data()),
          static_cast<std::streamsize>(data.pixels.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != data.pixels.size() * sizeof(float)) {
    throw DimensionError("images.f32 is shorter than the declared shape");
  }
  data.validate();
  return data;
}

}  // namespace forge
