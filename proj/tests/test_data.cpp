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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "forge/dataset.hpp"
#include "forge/error.hpp"
#include "forge/poison.hpp"
#include "forge/trigger.hpp"
#include "test_util.hpp"

namespace forge {
namespace {

using testing::TempDir;
using testing::tiny_shapes;

LabeledImageSet flat_set(std::size_t n, ImageShape shape, std::uint64_t seed) {
  LabeledImageSet s(shape, 10);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> img(shape.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : img) v = u(rng);
    s.push_back(img, static_cast<int>(i % 10));
  }
  return s;
}

TEST(Trigger, PatchStampsOnlyTheCorner) {
  const ImageShape shape{3, 8, 8};
  const auto data = tiny_shapes(4, 1, shape);
  const auto t = TriggerSpec::badnets(shape);
  const auto x = data.image(0);
  const auto y = t.apply(x);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 8; ++j) {
        const std::size_t k = (static_cast<std::size_t>(c) * 8 + i) * 8 + j;
        if (i >= 5 && j >= 5) {
          EXPECT_EQ(y[k], 1.0f);
        } else {
          EXPECT_EQ(y[k], x[k]);
        }
      }
    }
  }
}

TEST(Trigger, BlendIsConvexCombination) {
  const ImageShape shape{3, 8, 8};
  const auto data = tiny_shapes(3, 2, shape);
  const auto t = TriggerSpec::blend_noise(shape, 9, 0.2f);
  const auto& pattern = std::get<BlendTrigger>(t.params()).pattern;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto x = data.image(n);
    const auto y = t.apply(x);
    for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(y[k], 0.8f * x[k] + 0.2f * pattern[k], 1e-6f);
  }
}

TEST(Trigger, BlendWithZeroWeightIsIdentity) {
  const ImageShape shape{3, 8, 8};
  const auto data = tiny_shapes(2, 2, shape);
  const auto t = TriggerSpec(shape, BlendTrigger{std::vector<float>(shape.size(), 0.5f), 0.0f});
  const auto y = t.apply(data.image(0));
  EXPECT_TRUE(std::equal(y.begin(), y.end(), data.image(0).begin()));
}

TEST(Trigger, SinusoidFollowsColumnSignal) {
  const ImageShape shape{1, 4, 16};
  const auto data = flat_set(2, shape, 3);
  const auto t = TriggerSpec::sig(shape, 0.05f, 6.0f);
  const auto x = data.image(1);
  const auto y = t.apply(x);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 16; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * 16 + j;
      const double want = std::clamp(x[k] + 0.05 * std::sin(2.0 * std::numbers::pi * 6.0 * j / 16.0), 0.0, 1.0);
      EXPECT_NEAR(y[k], want, 1e-6);
    }
  }
}

TEST(Trigger, ZeroAdditivePatternIsIdentity) {
  const ImageShape shape{1, 1, 12};
  const auto data = flat_set(1, shape, 4);
  const auto t = TriggerSpec::additive(shape, std::vector<float>(12, 0.0f));
  const auto y = t.apply(data.image(0));
  EXPECT_TRUE(std::equal(y.begin(), y.end(), data.image(0).begin()));
}

TEST(Trigger, OutputStaysInUnitBox) {
  const ImageShape shape{3, 8, 8};
  const auto data = tiny_shapes(20, 5, shape);
  for (const auto& t : {TriggerSpec::sig(shape, 0.5f), TriggerSpec::blend_noise(shape, 1, 0.9f),
                        TriggerSpec::additive(shape, std::vector<float>(shape.size(), 0.7f))}) {
    for (std::size_t n = 0; n < data.size(); ++n) {
      for (float v : t.apply(data.image(n))) {
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 1.0f);
      }
    }
  }
}

TEST(Trigger, RejectsBadParameters) {
  const ImageShape shape{3, 8, 8};
  EXPECT_THROW(TriggerSpec::badnets(shape, 9), ValidationError);
  EXPECT_THROW(TriggerSpec::blend_noise(shape, 1, 1.5f), ValidationError);
  EXPECT_THROW(TriggerSpec::additive(shape, std::vector<float>(5, 0.0f)), DimensionError);
  EXPECT_THROW(parse_trigger_kind("warp"), ValidationError);
}

TEST(Trigger, JsonRoundTrip) {
  const ImageShape shape{3, 8, 8};
  for (const auto& t : {TriggerSpec::badnets(shape), TriggerSpec::blend_noise(shape, 3), TriggerSpec::sig(shape)}) {
    EXPECT_EQ(TriggerSpec::from_json(t.to_json()).to_json(), t.to_json());
  }
}

TEST(Poison, ExactCountOnFiftyThousandSamples) {
  const ImageShape shape{1, 4, 4};
  const auto data = flat_set(50000, shape, 1);
  PoisonPlan plan;
  plan.ratio = 0.1;
  plan.seed = 11;
  const auto out = poison_dataset(data, TriggerSpec::badnets(shape), plan);
  EXPECT_EQ(std::count(out.poison_mask.begin(), out.poison_mask.end(), 1), 5000);
}

TEST(Poison, CountIsRoundedRatio) {
  const ImageShape shape{1, 4, 4};
  for (std::size_t n : {7u, 10u, 33u, 101u}) {
    for (double r : {0.0, 0.05, 0.1, 0.25, 1.0}) {
      PoisonPlan plan;
      plan.ratio = r;
      const auto out = poison_dataset(flat_set(n, shape, n), TriggerSpec::badnets(shape), plan);
      EXPECT_EQ(static_cast<std::size_t>(std::count(out.poison_mask.begin(), out.poison_mask.end(), 1)),
                static_cast<std::size_t>(std::llround(r * static_cast<double>(n))));
    }
  }
}

TEST(Poison, UnselectedSamplesAreUntouched) {
  const ImageShape shape{3, 8, 8};
  const auto data = tiny_shapes(200, 3, shape);
  PoisonPlan plan;
  plan.target = 2;
  plan.seed = 5;
  const auto trig = TriggerSpec::badnets(shape);
  const auto out = poison_dataset(data, trig, plan);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (out.poison_mask[i]) {
      EXPECT_EQ(out.labels[i], 2);
      const auto want = trig.apply(data.image(i));
      EXPECT_TRUE(std::equal(want.begin(), want.end(), out.image(i).begin()));
    } else {
      EXPECT_EQ(out.labels[i], data.labels[i]);
      EXPECT_TRUE(std::equal(data.image(i).begin(), data.image(i).end(), out.image(i).begin()));
    }
  }
}

TEST(Poison, AllToAllWrapsAround) {
  PoisonPlan plan = PoisonPlan::parse_mode("all2all");
  EXPECT_EQ(plan.target_for(9, 10), 0);
  EXPECT_EQ(plan.target_for(3, 10), 4);
  const ImageShape shape{1, 4, 4};
  plan.ratio = 1.0;
  const auto data = flat_set(30, shape, 2);
  const auto out = poison_dataset(data, TriggerSpec::badnets(shape), plan);
  for (std::size_t i = 0; i < data.size(); ++i) EXPECT_EQ(out.labels[i], (data.labels[i] + 1) % 10);
}

TEST(Poison, CleanLabelKeepsLabelsAndPicksTargetClass) {
  const ImageShape shape{1, 4, 4};
  const auto data = flat_set(100, shape, 3);
  PoisonPlan plan;
  plan.target = 4;
  plan.ratio = 0.05;
  plan.clean_label = true;
  const auto out = poison_dataset(data, TriggerSpec::badnets(shape), plan);
  std::size_t marked = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(out.labels[i], data.labels[i]);
    if (out.poison_mask[i]) {
      ++marked;
      EXPECT_EQ(data.labels[i], 4);
    }
  }
  EXPECT_EQ(marked, 5u);
}

TEST(Poison, SeedDeterminesSelection) {
  const ImageShape shape{1, 4, 4};
  const auto data = flat_set(500, shape, 4);
  PoisonPlan a;
  a.seed = 1;
  PoisonPlan b = a;
  b.seed = 2;
  const auto t = TriggerSpec::badnets(shape);
  EXPECT_EQ(poison_dataset(data, t, a).poison_mask, poison_dataset(data, t, a).poison_mask);
  EXPECT_NE(poison_dataset(data, t, a).poison_mask, poison_dataset(data, t, b).poison_mask);
}

TEST(Poison, TriggeredTestSetKeepsSourceLabels) {
  const ImageShape shape{1, 4, 4};
  const auto data = flat_set(40, shape, 5);
  PoisonPlan plan;
  plan.target = 1;
  const auto out = make_triggered_testset(data, TriggerSpec::badnets(shape), plan);
  ASSERT_TRUE(out.has_source_labels());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(out.source_labels[i], data.labels[i]);
    EXPECT_EQ(out.labels[i], 1);
  }
}

TEST(Poison, RejectsBadPlans) {
  EXPECT_THROW(PoisonPlan::parse_mode("all2one:x"), ValidationError);
  EXPECT_THROW(PoisonPlan::parse_mode("one2all"), ValidationError);
  PoisonPlan p;
  p.ratio = 1.5;
  EXPECT_THROW(p.validate(10), ValidationError);
  p.ratio = 0.1;
  p.target = 10;
  EXPECT_THROW(p.validate(10), ValidationError);
}

TEST(Dataset, SampleIndicesAreDistinctSortedAndSeeded) {
  const auto a = sample_indices(1000, 137, 3);
  EXPECT_EQ(a.size(), 137u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 137u);
  EXPECT_EQ(a, sample_indices(1000, 137, 3));
  EXPECT_THROW(sample_indices(5, 6, 0), ValidationError);
}

TEST(Dataset, FractionCountRounds) {
  EXPECT_EQ(fraction_count(0.1, 50000), 5000u);
  EXPECT_EQ(fraction_count(0.55, 20000), 11000u);
  EXPECT_EQ(fraction_count(0.05, 30), 2u);
}

TEST(Dataset, SyntheticIsBalancedAndDeterministic) {
  const auto a = tiny_shapes(100, 7);
  const auto b = tiny_shapes(100, 7);
  EXPECT_EQ(a.pixels, b.pixels);
  EXPECT_EQ(a.labels, b.labels);
  std::vector<int> per_class(10, 0);
  for (int y : a.labels) ++per_class[y];
  for (int c : per_class) EXPECT_EQ(c, 10);
  for (float v : a.pixels) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Dataset, SaveLoadRoundTrip) {
  TempDir dir("dataset");
  const ImageShape shape{1, 4, 4};
  PoisonPlan plan;
  auto data = poison_dataset(flat_set(25, shape, 6), TriggerSpec::badnets(shape), plan);
  save_dataset(data, dir.path() / "d", 42);
  const auto back = load_dataset(dir.path() / "d");
  EXPECT_EQ(back.shape, data.shape);
  EXPECT_EQ(back.pixels, data.pixels);
  EXPECT_EQ(back.labels, data.labels);
  EXPECT_EQ(back.poison_mask, data.poison_mask);
}

TEST(Dataset, LoadRejectsMissingDirectory) {
  EXPECT_THROW(load_dataset("/nonexistent/forge-data"), ValidationError);
}

}  // namespace
}  // namespace forge
