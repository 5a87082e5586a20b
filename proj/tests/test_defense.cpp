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
#include <numeric>
#include <random>

#include "forge/diagnostics.hpp"
#include "forge/error.hpp"
#include "forge/pbe.hpp"
#include "forge/poison.hpp"
#include "test_util.hpp"

namespace forge {
namespace {

using testing::tiny_network;
using testing::tiny_shapes;

// ------------------------------------------------------------------ ASR

TEST(Asr, ExcludesSamplesAlreadyOfTheTargetClass) {
  const Network net = tiny_network();
  const auto clean = tiny_shapes(50, 1);
  PoisonPlan plan;
  plan.target = net.predict(clean.image(0));
  const auto triggered = make_triggered_testset(clean, TriggerSpec::badnets(clean.shape), plan);
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < triggered.size(); ++i) {
    if (clean.labels[i] == plan.target) continue;
    ++total;
    hits += net.predict(triggered.image(i)) == plan.target;
  }
  EXPECT_DOUBLE_EQ(compute_asr(net, triggered), static_cast<double>(hits) / static_cast<double>(total));
}

TEST(Asr, NeedsSourceLabels) {
  EXPECT_THROW(compute_asr(tiny_network(), tiny_shapes(5, 1)), ValidationError);
}

// ------------------------------------------------------------------ histogram

TEST(Histogram, RowsSumToOneAndSkipTargetClass) {
  const Network net = tiny_network({3, 8, 8}, 3);
  const auto clean = tiny_shapes(40, 2);
  AdvConfig cfg;
  cfg.steps = 3;
  PoisonPlan plan;
  plan.target = 3;
  const auto h = adv_target_histogram(net, clean, cfg, plan);
  std::size_t expected = 0;
  for (int y : clean.labels) expected += y != 3;
  EXPECT_EQ(h.row_total(3), expected);
  double s = 0.0;
  for (int c = 0; c < 10; ++c) s += h.frequency(3, c);
  EXPECT_NEAR(s, 1.0, 1e-9);
  for (int r = 0; r < 10; ++r) {
    if (r != 3) {
      EXPECT_EQ(h.row_total(r), 0u);
      EXPECT_EQ(h.row_max_frequency(r), 0.0);
    }
  }
}

TEST(Histogram, AllToAllFillsEveryRow) {
  const Network net = tiny_network();
  const auto clean = tiny_shapes(30, 3);
  AdvConfig cfg;
  cfg.steps = 2;
  const auto h = adv_target_histogram(net, clean, cfg, PoisonPlan::parse_mode("all2all"));
  for (int r = 0; r < 10; ++r) {
    EXPECT_EQ(h.row_total(r), 3u);
    double s = 0.0;
    for (int c = 0; c < 10; ++c) s += h.frequency(r, c);
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Histogram, MergeAddsCounts) {
  LabelHistogram a(3), b(3);
  a.counts[1] = 2;
  b.counts[1] = 5;
  a.merge(b);
  EXPECT_EQ(a.count(0, 1), 7u);
  EXPECT_THROW(a.merge(LabelHistogram(4)), ValidationError);
}

// ------------------------------------------------------------------ features

TEST(FeatureDistance, MeanIgnoresSampleOrder) {
  const Network benign = tiny_network({3, 8, 8}, 1);
  const Network infected = tiny_network({3, 8, 8}, 2);
  const auto clean = tiny_shapes(6, 4);
  AdvConfig cfg;
  cfg.random_start = false;
  const auto trig = TriggerSpec::badnets(clean.shape);
  const auto a = feature_distances(benign, infected, clean, trig, cfg);
  std::vector<std::size_t> rev(clean.size());
  std::iota(rev.rbegin(), rev.rend(), std::size_t{0});
  const auto b = feature_distances(benign, infected, clean.subset(rev), trig, cfg);
  EXPECT_NEAR(a.benign, b.benign, 1e-9 * (1.0 + a.benign));
  EXPECT_NEAR(a.infected, b.infected, 1e-9 * (1.0 + a.infected));
  EXPECT_EQ(a.samples, 6u);
}

// ------------------------------------------------------------------ AP

TEST(AveragePrecision, PerfectRankingIsOne) {
  const std::vector<double> s{0.9, 0.8, 0.3, 0.1};
  const std::vector<std::uint8_t> p{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(precision_recall_ap(s, p).average_precision, 1.0);
}

TEST(AveragePrecision, HandComputedExample) {
  const std::vector<double> s{0.9, 0.8, 0.7, 0.6};
  const std::vector<std::uint8_t> p{1, 0, 1, 0};
  EXPECT_NEAR(precision_recall_ap(s, p).average_precision, 0.5 + 0.5 * 2.0 / 3.0, 1e-12);
}

TEST(AveragePrecision, AllTiedEqualsPrevalence) {
  std::vector<double> s(100, 0.5);
  std::vector<std::uint8_t> p(100, 1);
  for (int i = 0; i < 10; ++i) p[i * 10] = 0;
  const auto c = precision_recall_ap(s, p);
  EXPECT_NEAR(c.average_precision, 0.9, 1e-12);
  EXPECT_EQ(c.thresholds.size(), 1u);
}

TEST(AveragePrecision, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> s(500);
  std::vector<std::uint8_t> p(500);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = std::round(u(rng) * 50.0) / 50.0;  // plenty of ties
    p[i] = u(rng) > 0.3 ? 1 : 0;
  }
  const double ap = precision_recall_ap(s, p).average_precision;
  for (auto f : {+[](double v) { return 3.0 * v + 7.0; }, +[](double v) { return std::exp(v); },
                 +[](double v) { return v * v * v; }, +[](double v) { return std::atan(5.0 * v); }}) {
    std::vector<double> t(s.size());
    std::transform(s.begin(), s.end(), t.begin(), f);
    EXPECT_DOUBLE_EQ(precision_recall_ap(t, p).average_precision, ap);
  }
}

TEST(AveragePrecision, CurveEndsAtFullRecall) {
  const std::vector<double> s{0.2, 0.4, 0.4, 0.9, 0.1};
  const std::vector<std::uint8_t> p{0, 1, 0, 1, 1};
  const auto c = precision_recall_ap(s, p);
  EXPECT_TRUE(std::is_sorted(c.thresholds.rbegin(), c.thresholds.rend()));
  EXPECT_DOUBLE_EQ(c.recall.back(), 1.0);
  EXPECT_DOUBLE_EQ(c.precision.back(), 3.0 / 5.0);
}

TEST(AveragePrecision, RejectsDegenerateInput) {
  const std::vector<double> s{0.1, 0.2};
  EXPECT_THROW(precision_recall_ap(s, std::vector<std::uint8_t>{0, 0}), ValidationError);
  EXPECT_THROW(precision_recall_ap(s, std::vector<std::uint8_t>{1}), DimensionError);
}

// ------------------------------------------------------------------ scores

TEST(PredictionChange, KnownValues) {
  const std::vector<float> a{3, 4}, b{4, 3}, c{-4, 3};
  EXPECT_NEAR(prediction_change_score(a, b), 0.96, 1e-12);
  EXPECT_NEAR(prediction_change_score(a, c), 0.0, 1e-12);
  EXPECT_NEAR(prediction_change_score(a, a), 1.0, 1e-12);
}

TEST(PredictionChange, RangeAndScaleInvariance) {
  std::mt19937_64 rng(8);
  std::normal_distribution<float> g;
  std::uniform_real_distribution<float> scale(0.01f, 100.0f);
  for (int t = 0; t < 200; ++t) {
    std::vector<float> a(10), b(10);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng);
    const double s = prediction_change_score(a, b);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
    const float k = scale(rng);
    std::vector<float> ka(a);
    for (auto& v : ka) v *= k;
    EXPECT_NEAR(prediction_change_score(ka, b), s, 1e-5);
  }
}

TEST(PredictionChange, ZeroVectorIsDegenerate) {
  bool degenerate = false;
  EXPECT_EQ(prediction_change_score(std::vector<float>{0, 0}, std::vector<float>{1, 2}, &degenerate), 0.0);
  EXPECT_TRUE(degenerate);
}

TEST(Ranking, DescendingWithTiesByIndex) {
  const auto r = rank_by_scores({0.5, 0.9, 0.5, 0.1, 0.9});
  EXPECT_EQ(r.order, (std::vector<std::size_t>{1, 4, 0, 2, 3}));
}

TEST(Ranking, SelectionSizesFollowSchedule) {
  std::vector<double> s(1000);
  std::iota(s.begin(), s.end(), 0.0);
  const auto r = rank_by_scores(s);
  for (double f : {0.1, 0.2, 0.4, 0.55, 0.7}) {
    const auto idx = select_extra_indices(r, f);
    EXPECT_EQ(idx.size(), fraction_count(f, 1000));
    EXPECT_EQ(idx.front(), 999u);
  }
  EXPECT_THROW(select_extra_indices(r, 0.0), ValidationError);
}

// ------------------------------------------------------------------ PBE

PurifyConfig no_training() {
  PurifyConfig p = PurifyConfig::defaults();
  p.adversarial_finetune.epochs = 0;
  p.clean_finetune.epochs = 0;
  return p;
}

TEST(Pbe, ZeroEpochsReturnTheInfectedModel) {
  const Network net = tiny_network({3, 8, 8}, 4);
  const auto data = tiny_shapes(30, 5);
  EXPECT_EQ(purify_model(net, data, no_training()).checksum(), net.checksum());
  EXPECT_EQ(pbe_with_clean_extra(net, data, no_training()).checksum(), net.checksum());
}

TEST(Pbe, SingleFullIterationWithoutTrainingRanksEverythingAsUnchanged) {
  const Network net = tiny_network({3, 8, 8}, 4);
  const auto data = tiny_shapes(30, 6);
  PbeConfig cfg;
  cfg.iterations = 1;
  cfg.schedule = {1.0};
  cfg.purify = no_training();
  int calls = 0;
  const auto r = pbe_run(net, data, cfg,
                         [&](const Network&, const CleanRanking& ranking, const std::vector<std::size_t>& extra,
                             IterationReport&) {
                           ++calls;
                           EXPECT_EQ(extra.size(), 30u);
                           for (double s : ranking.scores) EXPECT_NEAR(s, 1.0, 1e-6);
                         });
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(r.purified.checksum(), net.checksum());
  ASSERT_EQ(r.reports.size(), 1u);
  EXPECT_EQ(r.reports[0].extra_size, 30u);
}

TEST(Pbe, ExtraSetFollowsSchedule) {
  const Network net = tiny_network({3, 8, 8}, 4);
  const auto data = tiny_shapes(40, 7);
  PbeConfig cfg;
  cfg.iterations = 3;
  cfg.schedule = {0.1, 0.25, 0.5};
  cfg.purify = PurifyConfig::defaults();
  cfg.purify.attack.steps = 1;
  cfg.purify.adversarial_finetune.epochs = 1;
  cfg.purify.clean_finetune.epochs = 1;
  const auto r = pbe_run(net, data, cfg);
  ASSERT_EQ(r.reports.size(), 3u);
  EXPECT_EQ(r.reports[0].extra_size, 4u);
  EXPECT_EQ(r.reports[1].extra_size, 10u);
  EXPECT_EQ(r.reports[2].extra_size, 20u);
}

TEST(Pbe, RunIsDeterministic) {
  const Network net = tiny_network({3, 8, 8}, 4);
  const auto data = tiny_shapes(30, 8);
  PbeConfig cfg;
  cfg.iterations = 2;
  cfg.schedule = {0.2, 0.4};
  cfg.purify.attack.steps = 2;
  cfg.purify.adversarial_finetune.epochs = 1;
  cfg.purify.clean_finetune.epochs = 1;
  EXPECT_EQ(pbe_run(net, data, cfg).purified.checksum(), pbe_run(net, data, cfg).purified.checksum());
}

TEST(Pbe, RejectsBadSchedules) {
  PbeConfig cfg;
  cfg.schedule = {0.2, 0.1, 0.3, 0.4, 0.5};
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.schedule = {0.1, 0.2};
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.iterations = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Pbe, ConfigJsonRoundTrip) {
  PbeConfig cfg;
  cfg.seed = 12;
  cfg.purify.clean_finetune.epochs = 9;
  EXPECT_EQ(PbeConfig::from_json(cfg.to_json()).to_json(), cfg.to_json());
}

}  // namespace
}  // namespace forge
