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
#include <random>

#include "forge/attack.hpp"
#include "forge/error.hpp"
#include "forge/theory.hpp"
#include "test_util.hpp"

namespace forge {
namespace {

using testing::tiny_network;
using testing::tiny_shapes;

double linf_dist(std::span<const float> a, std::span<const float> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(static_cast<double>(a[i]) - b[i]));
  return m;
}

double l2_dist(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (static_cast<double>(a[i]) - b[i]) * (static_cast<double>(a[i]) - b[i]);
  return std::sqrt(s);
}

class NormBox : public ::testing::TestWithParam<std::tuple<Norm, float, bool>> {};

TEST_P(NormBox, AdversarialImageStaysInBallAndBox) {
  const auto [norm, eps, random_start] = GetParam();
  const Network net = tiny_network({3, 8, 8}, 7, 0.1f);
  const auto data = tiny_shapes(20, 3);
  AdvConfig cfg;
  cfg.norm = norm;
  cfg.epsilon = eps;
  cfg.step_size = eps / 3.0f;
  cfg.steps = 7;
  cfg.random_start = random_start;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto r = attack_untargeted_traced(net, data.image(n), data.labels[n], cfg, n);
    const double d = norm == Norm::linf ? linf_dist(r.image, data.image(n)) : l2_dist(r.image, data.image(n));
    EXPECT_LE(d, eps * (1.0 + 1e-5) + 1e-7);
    for (float v : r.image) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Budgets, NormBox,
                         ::testing::Combine(::testing::Values(Norm::linf, Norm::l2),
                                            ::testing::Values(2.0f / 255.0f, 8.0f / 255.0f, 0.5f),
                                            ::testing::Bool()));

TEST(Attack, BestIterateIsReturned) {
  const Network net = tiny_network({3, 8, 8}, 8);
  const auto data = tiny_shapes(10, 4);
  AdvConfig cfg;
  cfg.steps = 6;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto r = attack_untargeted_traced(net, data.image(n), data.labels[n], cfg, n);
    EXPECT_GE(r.best_loss, r.clean_loss);
    for (float l : r.step_losses) EXPECT_GE(r.best_loss, l);
    EXPECT_FLOAT_EQ(net.loss(r.image, data.labels[n]), r.best_loss);
    EXPECT_EQ(r.step_losses.size(), 6u);
  }
}

TEST(Attack, VanishingRadiusReturnsInput) {
  const Network net = tiny_network();
  const auto data = tiny_shapes(3, 5);
  AdvConfig cfg;
  cfg.epsilon = 1e-12f;
  cfg.step_size = 1e-12f;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto adv = attack_untargeted(net, data.image(n), data.labels[n], cfg, n);
    EXPECT_LE(linf_dist(adv, data.image(n)), 1e-12);
  }
}

TEST(Attack, SameSeedSameImage) {
  const Network net = tiny_network();
  const auto data = tiny_shapes(2, 6);
  AdvConfig cfg;
  cfg.seed = 3;
  EXPECT_EQ(attack_untargeted(net, data.image(0), data.labels[0], cfg, 1),
            attack_untargeted(net, data.image(0), data.labels[0], cfg, 1));
}

TEST(Attack, BatchKeepsLabelsAndMask) {
  const Network net = tiny_network();
  auto data = tiny_shapes(6, 7);
  data.poison_mask.assign(6, 0);
  data.poison_mask[2] = 1;
  const auto out = attack_batch(net, data, AdvConfig{});
  EXPECT_EQ(out.labels, data.labels);
  EXPECT_EQ(out.poison_mask, data.poison_mask);
}

TEST(Attack, RejectsBadConfig) {
  AdvConfig cfg;
  cfg.epsilon = 0.0f;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.steps = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  EXPECT_THROW(parse_norm("l1"), ValidationError);
}

// On a two-class linear model the loss is monotone in a linear function of
// the input, so its maximum over the (ball x box) lies at a corner. The
// oracle enumerates all 2^d corners.
TEST(Attack, MatchesCornerOracleOnLinearModels) {
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<float> w(-1.0f, 1.0f), u(0.0f, 1.0f);
  for (int d = 2; d <= 12; ++d) {
    for (int trial = 0; trial < 5; ++trial) {
      LinearModel model(2, d);
      for (auto& v : model.weights()) v = w(rng);
      std::vector<float> x(static_cast<std::size_t>(d));
      for (auto& v : x) v = u(rng);
      const int y = trial % 2;
      const float eps = 0.05f + 0.1f * u(rng);

      float best = -1.0f;
      std::vector<float> best_corner;
      std::vector<float> z(x.size());
      for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
        for (int i = 0; i < d; ++i) {
          z[i] = (mask >> i) & 1u ? std::clamp(x[i] + eps, 0.0f, 1.0f) : std::clamp(x[i] - eps, 0.0f, 1.0f);
        }
        const float l = model.loss(z, y);
        if (l > best) {
          best = l;
          best_corner = z;
        }
      }

      AdvConfig cfg;
      cfg.epsilon = eps;
      cfg.step_size = 2.0f * eps;
      cfg.steps = 3;
      cfg.random_start = trial >= 3;
      const auto r = attack_untargeted_traced(model, x, y, cfg);
      EXPECT_EQ(r.image, best_corner) << "d=" << d << " trial=" << trial;
      EXPECT_EQ(r.best_loss, best);
    }
  }
}

}  // namespace
}  // namespace forge
