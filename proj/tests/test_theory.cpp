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


#include <algorithm>
#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "forge/error.hpp"
#include "forge/theory.hpp"
#include "test_util.hpp"

namespace forge {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Closed form written out independently of the library.
double reference_bound(double p_norm, double tau, int k, double ell) {
  const double a = std::sqrt(2.0) - 1.0;
  const double u = ell * p_norm * p_norm;
  const double c = std::sqrt(2.0) * k / (std::exp(tau) + k);
  return a * u / std::sqrt(a * a * u * u + (u + c) * (u + c));
}

TEST(Bound, MatchesReferenceFormula) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int t = 0; t < 200; ++t) {
    const double p = u(rng), tau = u(rng), ell = u(rng);
    const int k = 2 + t % 9;
    EXPECT_NEAR(theorem1_lower_bound({p, tau, k, ell}), reference_bound(p, tau, k, ell), 1e-12);
  }
}

TEST(Bound, LimitForLargeTrigger) {
  EXPECT_NEAR(theorem1_lower_bound({1.0, 2.0, 5, kInf}), 0.38268, 1e-4);
  EXPECT_NEAR(theorem1_lower_bound({1e4, 2.0, 5, 1.0}), 0.38268, 1e-4);
  EXPECT_NEAR(theorem1_lower_bound({1e4, 0.1, 100, 1.0}), 0.38268, 1e-4);
}

TEST(Bound, IncreasesWithTriggerNormAndMargin) {
  double prev = 0.0;
  for (double p = 0.05; p < 20.0; p *= 1.5) {
    const double b = theorem1_lower_bound({p, 2.0, 5, 1.0});
    EXPECT_GT(b, prev);
    prev = b;
  }
  prev = 0.0;
  for (double tau = 0.1; tau < 20.0; tau += 0.5) {
    const double b = theorem1_lower_bound({0.5, tau, 5, 1.0});
    EXPECT_GT(b, prev);
    prev = b;
  }
  EXPECT_LT(theorem1_lower_bound({0.5, 2.0, 10, 1.0}), theorem1_lower_bound({0.5, 2.0, 3, 1.0}));
}

TEST(Bound, EllForRatioInvertsTheBound) {
  for (double q : {0.01, 0.1, 0.2, 0.3, 0.38}) {
    const double ell = ell_for_ratio(q, 0.7, 2.0, 5);
    ASSERT_TRUE(std::isfinite(ell));
    EXPECT_NEAR(theorem1_lower_bound({0.7, 2.0, 5, ell}), q, 1e-10);
  }
  EXPECT_TRUE(std::isinf(ell_for_ratio(0.5, 0.7, 2.0, 5)));
  EXPECT_EQ(ell_for_ratio(0.0, 0.7, 2.0, 5), 0.0);
}

TEST(Bound, RejectsOutOfDomainInputs) {
  EXPECT_THROW(theorem1_lower_bound({0.0, 2.0, 5, 1.0}), ValidationError);
  EXPECT_THROW(theorem1_lower_bound({1.0, 2.0, 1, 1.0}), ValidationError);
  EXPECT_THROW(theorem1_lower_bound({1.0, 2.0, 5, -1.0}), ValidationError);
}

TEST(Projection, PythagorasHolds) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g;
  for (int t = 0; t < 100; ++t) {
    std::vector<float> r(20), p(20);
    for (auto& v : r) v = g(rng);
    for (auto& v : p) v = g(rng);
    const auto res = project_onto_trigger(r, p);
    double along = 0.0, rest = 0.0, total = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      along += static_cast<double>(res.along_trigger[i]) * res.along_trigger[i];
      const double o = static_cast<double>(r[i]) - res.along_trigger[i];
      rest += o * o;
      total += static_cast<double>(r[i]) * r[i];
    }
    EXPECT_NEAR(along + rest, total, 1e-5 * total);
    EXPECT_NEAR(std::sqrt(along), res.along_norm, 1e-5 * (1.0 + res.along_norm));
    EXPECT_GE(res.ratio, 0.0);
    EXPECT_LE(res.ratio, 1.0);
  }
}

TEST(Projection, InvariantToTriggerScale) {
  const std::vector<float> r{0.3f, -0.1f, 0.7f, 0.2f};
  const std::vector<float> p{1.0f, 2.0f, -1.0f, 0.5f};
  std::vector<float> p3(p), pneg(p);
  for (auto& v : p3) v *= 3.0f;
  for (auto& v : pneg) v = -v;
  const double base = project_onto_trigger(r, p).ratio;
  EXPECT_NEAR(project_onto_trigger(r, p3).ratio, base, 1e-12);
  EXPECT_NEAR(project_onto_trigger(r, pneg).ratio, base, 1e-12);
}

TEST(Projection, ParallelAndOrthogonalExtremes) {
  EXPECT_NEAR(project_onto_trigger(std::vector<float>{2, 4}, std::vector<float>{1, 2}).ratio, 1.0, 1e-12);
  EXPECT_NEAR(project_onto_trigger(std::vector<float>{2, -1}, std::vector<float>{1, 2}).ratio, 0.0, 1e-12);
  EXPECT_THROW(project_onto_trigger(std::vector<float>{1, 1}, std::vector<float>{0, 0}), ValidationError);
}

LinearSyntheticConfig small_linear() {
  LinearSyntheticConfig cfg;
  cfg.dim = 8;
  cfg.classes = 3;
  cfg.train_per_class = 20;
  cfg.heldout_per_class = 5;
  cfg.seed = 4;
  return cfg;
}

TEST(Linear, ZeroTriggerEqualsCleanTraining) {
  const auto cfg = small_linear();
  const std::vector<float> zero(8, 0.0f);
  PoisonPlan poisoned;
  poisoned.ratio = 0.1;
  PoisonPlan none;
  none.ratio = 0.0;
  const auto a = train_linear_infected(cfg, zero, poisoned);
  const auto b = train_linear_infected(cfg, zero, none);
  ASSERT_EQ(a.model.weights().size(), b.model.weights().size());
  for (std::size_t i = 0; i < a.model.weights().size(); ++i) EXPECT_EQ(a.model.weights()[i], b.model.weights()[i]);
  EXPECT_GE(a.clean_margin, cfg.required_margin);
}

TEST(Linear, MarginIsMinimumOverSamples) {
  LinearModel m(2, 1);
  m.weights()[0] = -1.0;
  m.weights()[1] = 1.0;
  LabeledImageSet data({1, 1, 1}, 2);
  data.push_back(std::vector<float>{0.5f}, 1);  // margin 1
  data.push_back(std::vector<float>{0.2f}, 1);  // margin 0.4
  data.push_back(std::vector<float>{0.1f}, 0);  // margin -0.2
  EXPECT_NEAR(m.margin(data), -0.2, 1e-6);
}

TEST(Linear, UnreachableMarginIsOutOfScope) {
  auto cfg = small_linear();
  cfg.required_margin = 1e6;
  cfg.max_epochs = 20;
  PoisonPlan plan;
  EXPECT_THROW(train_linear_infected(cfg, std::vector<float>(8, 0.1f), plan), TheoremScopeError);
}

TEST(Sweep, SmallSweepWritesCsv) {
  TheorySweepConfig cfg;
  cfg.instances = 3;
  cfg.seed = 9;
  const auto r = run_theory_sweep(cfg);
  EXPECT_LE(r.included, 3u);
  EXPECT_GE(r.rows.size(), r.included);
  for (const auto& row : r.rows) {
    if (!row.included) continue;
    EXPECT_GE(row.margin, cfg.tau);
    EXPECT_GE(row.ratio, 0.0);
    EXPECT_LE(row.ratio, 1.0);
  }
  testing::TempDir dir("sweep");
  write_sweep_csv(r, dir.path() / "t.csv");
  std::ifstream in(dir.path() / "t.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "seed,tau_achieved,trigger_norm,ratio,bound,status");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line); ++lines) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5) << line;
  }
  EXPECT_EQ(lines, r.rows.size());
}

}  // namespace
}  // namespace forge
