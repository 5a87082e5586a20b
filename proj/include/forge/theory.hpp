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

// Numerical check of the trigger-alignment bound for linear classifiers.
//
// For a bias-free linear softmax classifier W = (w_1 .. w_K) trained on data
// poisoned with an additive trigger x + P, the untargeted adversarial
// perturbation r has a component along P whose share is bounded below by
//
//   (sqrt2 - 1) l |P|^2
//   ---------------------------------------------------------------------
//   sqrt( (sqrt2 - 1)^2 l^2 |P|^4 + (l |P|^2 + sqrt2 K / (exp(tau) + K))^2 )
//
// where tau is the clean margin. The coefficient l is not pinned down by the
// statement, so the sweep fits the largest l consistent with all instances.

#ifndef FORGE_THEORY_HPP_
#define FORGE_THEORY_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "forge/attack.hpp"
#include "forge/dataset.hpp"
#include "forge/network.hpp"
#include "forge/poison.hpp"

namespace forge {

struct TheoremInputs {
  double trigger_norm = 1.0;  // |P|
  double margin = 1.0;        // tau
  int classes = 2;            // K
  double ell = 1.0;           // l; +inf gives the |P| -> inf limit

  void validate() const;
};

double theorem1_lower_bound(const TheoremInputs& in);

// Smallest l at which the bound reaches `ratio` (+inf when the ratio is at or
// above the l -> inf limit; 0 when the ratio is 0).
double ell_for_ratio(double ratio, double trigger_norm, double margin, int classes);

// Bias-free linear softmax classifier, logits = W x.
class LinearModel final : public Classifier {
 public:
  LinearModel(int classes, int dim);

  int num_classes() const override { return classes_; }
  std::size_t input_size() const override { return static_cast<std::size_t>(dim_); }
  void logits(std::span<const float> x, std::span<float> out) const override;
  float loss_and_input_gradient(std::span<const float> x, int y, std::span<float> grad) const override;
  using Classifier::logits;

  std::span<const double> weights() const { return weights_; }  // row-major K x d
  std::span<double> weights() { return weights_; }
  std::span<const double> row(int k) const { return {weights_.data() + static_cast<std::size_t>(k) * dim_, static_cast<std::size_t>(dim_)}; }

  // min_i (a_{y_i}(x_i) - max_{k != y_i} a_k(x_i)).
  double margin(const LabeledImageSet& data) const;

 private:
  int classes_;
  int dim_;
  std::vector<double> weights_;
};

struct LinearSyntheticConfig {
  int dim = 20;
  int classes = 5;
  std::size_t train_per_class = 40;
  std::size_t heldout_per_class = 20;
  double spread = 0.03;          // per-coordinate std of each Gaussian cluster
  double required_margin = 2.0;  // tau
  double learning_rate = 2.0;
  int max_epochs = 50000;
  std::uint64_t seed = 0;
};

struct LinearExperiment {
  LinearModel model;
  LabeledImageSet train;    // poisoned training set, shape 1x1xd
  LabeledImageSet heldout;  // clean held-out samples
  double clean_margin = 0.0;
  double backdoor_success = 0.0;  // held-out non-target x with x + P predicted as target
};

// Gaussian clusters inside [0.2, 0.8]^d, one per class. Clusters are
// resampled until the class means are at least 0.3 apart.
LabeledImageSet make_linear_clusters(const LinearSyntheticConfig& cfg, std::size_t per_class,
                                     std::uint64_t seed);

// Trains W by full-batch gradient descent from zero on clusters poisoned with
// x + P. Stops once the clean margin reaches the requirement and every
// poisoned sample is classified as its target. A zero trigger poisons
// nothing. Throws TheoremScopeError when the margin is not reached.
LinearExperiment train_linear_infected(const LinearSyntheticConfig& cfg, std::span<const float> trigger,
                                       const PoisonPlan& plan);

struct ProjectionResult {
  std::vector<float> perturbation;   // r
  std::vector<float> along_trigger;  // projection of r on the direction of P
  double perturbation_norm = 0.0;
  double along_norm = 0.0;
  double ratio = 0.0;  // |along| / |r|
};

// Pure geometry: projects `r` onto the direction of `trigger`.
ProjectionResult project_onto_trigger(std::span<const float> r, std::span<const float> trigger);

// Attacks (x, y) on the linear model and projects the perturbation onto P.
// Throws ValidationError when the attack has not converged and
// DegeneratePerturbationError when |r| < 1e-10.
ProjectionResult measure_projection_ratio(const LinearModel& model, std::span<const float> x, int y,
                                          std::span<const float> trigger, const AdvConfig& cfg);

struct TheorySweepConfig {
  std::size_t instances = 100;  // instances meeting the margin assumption; at most 4x as many draws
  int dim = 20;
  int classes = 5;
  double tau = 2.0;
  double poison_ratio = 0.1;
  std::uint64_t seed = 0;
  AdvConfig attack = default_attack();

  static AdvConfig default_attack();
};

struct SweepRow {
  std::uint64_t seed = 0;
  double margin = 0.0;
  double trigger_norm = 0.0;
  double ratio = 0.0;  // worst case over held-out samples
  double bound = 0.0;
  double backdoor_success = 0.0;
  bool included = false;
  bool pass = false;
  std::string note;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double fitted_ell = 0.0;
  std::size_t included = 0;
  std::size_t passed = 0;
  // l fitted on even-indexed instances, pass rate on odd-indexed ones.
  double cross_fit_ell = 0.0;
  double cross_pass_rate = 0.0;
};

SweepResult run_theory_sweep(const TheorySweepConfig& cfg);

// Columns: seed, tau_achieved, trigger_norm, ratio, bound, status.
void write_sweep_csv(const SweepResult& result, const std::filesystem::path& path);

}  // namespace forge

#endif  // FORGE_THEORY_HPP_
