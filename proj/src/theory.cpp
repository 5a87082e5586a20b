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

#include "forge/theory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>

#include "forge/error.hpp"
#include "forge/hash.hpp"
#include "forge/trigger.hpp"

namespace forge {

namespace {

const double kA = std::sqrt(2.0) - 1.0;

double k_term(double margin, int classes) {
  return std::sqrt(2.0) * classes / (std::exp(margin) + classes);
}

double norm2(std::span<const float> v) {
  double s = 0.0;
  for (float f : v) s += static_cast<double>(f) * f;
  return std::sqrt(s);
}

}  // namespace

void TheoremInputs::validate() const {
  if (!(trigger_norm > 0.0) || !std::isfinite(trigger_norm)) throw ValidationError("|P| must be positive and finite");
  if (!(margin > 0.0)) throw ValidationError("margin tau must be positive");
  if (classes < 2) throw ValidationError("K must be at least 2");
  if (!(ell > 0.0)) throw ValidationError("l must be positive");
}

double theorem1_lower_bound(const TheoremInputs& in) {
  in.validate();
  const double c = k_term(in.margin, in.classes);
  if (std::isinf(in.ell)) return kA / std::sqrt(kA * kA + 1.0);
  const double u = in.ell * in.trigger_norm * in.trigger_norm;
  return kA * u / std::sqrt(kA * kA * u * u + (u + c) * (u + c));
}

double ell_for_ratio(double ratio, double trigger_norm, double margin, int classes) {
  TheoremInputs{trigger_norm, margin, classes, 1.0}.validate();
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ValidationError("ratio must lie in [0,1]");
  if (ratio == 0.0) return 0.0;
  // bound(u) = q  <=>  a u sqrt(1 - q^2) / q = u + c, with u = l |P|^2.
  const double rhs = kA * std::sqrt(1.0 - ratio * ratio) / ratio;
  if (rhs <= 1.0) return std::numeric_limits<double>::infinity();
  return k_term(margin, classes) / (rhs - 1.0) / (trigger_norm * trigger_norm);
}

LinearModel::LinearModel(int classes, int dim)
    : classes_(classes), dim_(dim), weights_(static_cast<std::size_t>(classes) * dim, 0.0) {
  if (classes < 2) throw ValidationError("linear model needs K >= 2");
  if (dim < 1) throw ValidationError("linear model needs d >= 1");
}

void LinearModel::logits(std::span<const float> x, std::span<float> out) const {
  if (x.size() != input_size() || out.size() != static_cast<std::size_t>(classes_)) {
    throw DimensionError("linear model input or output size mismatch");
  }
  for (int k = 0; k < classes_; ++k) {
    const auto w = row(k);
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s += w[i] * x[i];
    out[k] = static_cast<float>(s);
  }
}

float LinearModel::loss_and_input_gradient(std::span<const float> x, int y, std::span<float> grad) const {
  if (grad.size() != input_size()) throw DimensionError("gradient buffer size mismatch");
  std::vector<double> z(classes_);
  for (int k = 0; k < classes_; ++k) {
    const auto w = row(k);
    for (int i = 0; i < dim_; ++i) z[k] += w[i] * x[i];
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) sum += (v = std::exp(v - zmax));
  std::vector<double> g(dim_, 0.0);
  for (int k = 0; k < classes_; ++k) {
    const double coef = z[k] / sum - (k == y ? 1.0 : 0.0);
    const auto w = row(k);
    for (int i = 0; i < dim_; ++i) g[i] += coef * w[i];
  }
  for (int i = 0; i < dim_; ++i) grad[i] = static_cast<float>(g[i]);
  // Same value as loss(), so attack iterates compare on one scale.
  return loss(x, y);
}

double LinearModel::margin(const LabeledImageSet& data) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto x = data.image(n);
    const int y = data.labels[n];
    double zy = 0.0, other = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < classes_; ++k) {
      const auto w = row(k);
      double s = 0.0;
      for (int i = 0; i < dim_; ++i) s += w[i] * x[i];
      if (k == y) zy = s; else other = std::max(other, s);
    }
    best = std::min(best, zy - other);
  }
  return best;
}

LabeledImageSet make_linear_clusters(const LinearSyntheticConfig& cfg, std::size_t per_class, std::uint64_t seed) {
  if (cfg.dim < 1 || cfg.classes < 2) throw ValidationError("synthetic linear data needs d >= 1 and K >= 2");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mean_dist(0.3, 0.7);
  std::vector<std::vector<double>> means(cfg.classes, std::vector<double>(cfg.dim));
  for (int k = 0; k < cfg.classes; ++k) {
    for (int attempt = 0;; ++attempt) {
      for (double& m : means[k]) m = mean_dist(rng);
      bool apart = true;
      for (int j = 0; j < k && apart; ++j) {
        double s = 0.0;
        for (int i = 0; i < cfg.dim; ++i) s += (means[k][i] - means[j][i]) * (means[k][i] - means[j][i]);
        apart = std::sqrt(s) >= 0.3;
      }
      if (apart) break;
      if (attempt > 1000) throw ValidationError("could not place separated cluster means");
    }
  }
  std::normal_distribution<double> noise(0.0, cfg.spread);
  LabeledImageSet out;
  out.shape = ImageShape{1, 1, cfg.dim};
  out.class_count = cfg.classes;
  std::vector<float> x(cfg.dim);
  for (std::size_t n = 0; n < per_class; ++n) {
    for (int k = 0; k < cfg.classes; ++k) {
      for (int i = 0; i < cfg.dim; ++i) x[i] = static_cast<float>(std::clamp(means[k][i] + noise(rng), 0.2, 0.8));
      out.push_back(x, k);
    }
  }
  return out;
}

LinearExperiment train_linear_infected(const LinearSyntheticConfig& cfg, std::span<const float> trigger,
                                       const PoisonPlan& plan) {
  if (trigger.size() != static_cast<std::size_t>(cfg.dim)) throw DimensionError("trigger length differs from d");
  plan.validate(cfg.classes);
  if (plan.mode != TargetMode::all_to_one) throw ValidationError("linear theory assumes an all-to-one plan");

  const LabeledImageSet clean =
      make_linear_clusters(cfg, cfg.train_per_class + cfg.heldout_per_class, cfg.seed);
  std::vector<std::size_t> train_idx, held_idx;
  for (std::size_t i = 0; i < clean.size(); ++i)
    (i < cfg.train_per_class * cfg.classes ? train_idx : held_idx).push_back(i);
  LabeledImageSet train = clean.subset(train_idx);
  LabeledImageSet heldout = clean.subset(held_idx);

  const TriggerSpec spec = TriggerSpec::additive(train.shape, std::vector<float>(trigger.begin(), trigger.end()));
  const bool poisoned = norm2(trigger) > 0.0 && plan.ratio > 0.0;
  if (poisoned) {
    train = poison_dataset(train, spec, plan);
  } else {
    train.poison_mask.assign(train.size(), 0);
  }

  std::vector<std::size_t> clean_idx;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (!train.poison_mask[i]) clean_idx.push_back(i);
  const LabeledImageSet clean_part = train.subset(clean_idx);

  LinearModel model(cfg.classes, cfg.dim);
  const auto n = static_cast<double>(train.size());
  std::vector<double> grad(model.weights().size());
  std::vector<double> z(cfg.classes);
  // Poisoned samples must clear the same margin on their target label.
  auto done = [&] { return model.margin(train) >= cfg.required_margin; };
  for (int epoch = 0; epoch < cfg.max_epochs && !(epoch % 10 == 0 && done()); ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    const auto w = model.weights();
    for (std::size_t s = 0; s < train.size(); ++s) {
      const auto x = train.image(s);
      for (int k = 0; k < cfg.classes; ++k) {
        double v = 0.0;
        for (int i = 0; i < cfg.dim; ++i) v += w[static_cast<std::size_t>(k) * cfg.dim + i] * x[i];
        z[k] = v;
      }
      const double zmax = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double& v : z) sum += (v = std::exp(v - zmax));
      for (int k = 0; k < cfg.classes; ++k) {
        const double coef = (z[k] / sum - (k == train.labels[s] ? 1.0 : 0.0)) / n;
        for (int i = 0; i < cfg.dim; ++i) grad[static_cast<std::size_t>(k) * cfg.dim + i] += coef * x[i];
      }
    }
    auto wm = model.weights();
    for (std::size_t j = 0; j < wm.size(); ++j) wm[j] -= cfg.learning_rate * grad[j];
  }

  const double margin = model.margin(clean_part);
  if (!std::isfinite(margin)) throw TrainingError("linear training produced non-finite weights", cfg.max_epochs);
  if (margin < cfg.required_margin) {
    throw TheoremScopeError("clean margin " + std::to_string(margin) + " below the required " +
                            std::to_string(cfg.required_margin));
  }

  std::size_t hits = 0, total = 0;
  if (poisoned) {
    for (std::size_t i = 0; i < heldout.size(); ++i) {
      if (heldout.labels[i] == plan.target) continue;
      ++total;
      if (model.predict(spec.apply(heldout.image(i))) == plan.target) ++hits;
    }
  }
  const double success = total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
  return LinearExperiment{std::move(model), std::move(train), std::move(heldout), margin, success};
}

ProjectionResult project_onto_trigger(std::span<const float> r, std::span<const float> trigger) {
  if (r.size() != trigger.size()) throw DimensionError("perturbation and trigger differ in length");
  const double pn = norm2(trigger);
  if (pn == 0.0) throw ValidationError("trigger has zero norm");
  double dot = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) dot += static_cast<double>(r[i]) * trigger[i];
  ProjectionResult out;
  out.perturbation.assign(r.begin(), r.end());
  out.along_trigger.resize(r.size());
  const double coef = dot / (pn * pn);
  for (std::size_t i = 0; i < r.size(); ++i) out.along_trigger[i] = static_cast<float>(coef * trigger[i]);
  out.perturbation_norm = norm2(r);
  out.along_norm = std::abs(dot) / pn;
  out.ratio = out.perturbation_norm == 0.0 ? 0.0 : std::min(1.0, out.along_norm / out.perturbation_norm);
  return out;
}

ProjectionResult measure_projection_ratio(const LinearModel& model, std::span<const float> x, int y,
                                          std::span<const float> trigger, const AdvConfig& cfg) {
  const AttackResult res = attack_untargeted_traced(model, x, y, cfg);
  const auto& losses = res.step_losses;
  if (losses.size() >= 2) {
    const double a = losses[losses.size() - 1], b = losses[losses.size() - 2];
    if (std::abs(a - b) > 1e-4 * std::max(1.0, std::abs(a))) {
      throw ValidationError("attack did not converge (loss still moving by " + std::to_string(std::abs(a - b)) + ")");
    }
  }
  std::vector<float> r(x.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = res.image[i] - x[i];
  if (norm2(r) < 1e-10) throw DegeneratePerturbationError("adversarial perturbation vanished");
  return project_onto_trigger(r, trigger);
}

AdvConfig TheorySweepConfig::default_attack() {
  AdvConfig a;
  a.norm = Norm::l2;
  a.epsilon = 0.05f;
  a.step_size = 0.005f;
  a.steps = 100;
  a.random_start = false;
  return a;
}

namespace {

double fit_ell(const std::vector<SweepRow>& rows, int classes, std::size_t parity_mod, std::size_t parity) {
  double ell = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].included || i % parity_mod != parity) continue;
    ell = std::min(ell, ell_for_ratio(rows[i].ratio, rows[i].trigger_norm, rows[i].margin, classes));
  }
  return std::min(ell * (1.0 - 1e-9), 1e12);
}

}  // namespace

SweepResult run_theory_sweep(const TheorySweepConfig& cfg) {
  if (cfg.instances == 0) throw ValidationError("sweep needs at least one instance");
  if (!(cfg.tau > 0.0)) throw ValidationError("tau must be positive");
  cfg.attack.validate();
  if (cfg.attack.norm != Norm::l2) throw ValidationError("the linear sweep uses l2 attacks");

  SweepResult result;
  // Excluded draws are kept in the table; drawing stops once enough instances
  // meet the margin assumption.
  std::size_t included = 0;
  for (std::size_t inst = 0; included < cfg.instances && inst < 4 * cfg.instances; ++inst) {
    SweepRow row;
    row.seed = mix_seed(cfg.seed, inst);
    std::mt19937_64 rng(mix_seed(row.seed, 0x7419));
    const double scale = std::uniform_real_distribution<double>(0.05, 0.2)(rng);
    std::uniform_real_distribution<double> entry(-scale, scale);
    std::vector<float> trigger(cfg.dim);
    for (float& p : trigger) p = static_cast<float>(entry(rng));
    row.trigger_norm = norm2(trigger);

    LinearSyntheticConfig syn;
    syn.dim = cfg.dim;
    syn.classes = cfg.classes;
    syn.required_margin = cfg.tau;
    syn.seed = row.seed;
    PoisonPlan plan;
    plan.mode = TargetMode::all_to_one;
    plan.target = static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.classes));
    plan.ratio = cfg.poison_ratio;
    plan.seed = mix_seed(row.seed, 1);

    try {
      const LinearExperiment exp = train_linear_infected(syn, trigger, plan);
      row.margin = exp.clean_margin;
      row.backdoor_success = exp.backdoor_success;
      double worst = 1.0;
      for (std::size_t i = 0; i < exp.heldout.size(); ++i) {
        if (exp.heldout.labels[i] == plan.target) continue;
        worst = std::min(worst, measure_projection_ratio(exp.model, exp.heldout.image(i), exp.heldout.labels[i],
                                                         trigger, cfg.attack).ratio);
      }
      row.ratio = worst;
      row.included = true;
      ++included;
    } catch (const TheoremScopeError& e) {
      row.note = std::string("excluded: ") + e.what();
    } catch (const DegeneratePerturbationError& e) {
      row.note = std::string("excluded: ") + e.what();
    } catch (const ValidationError& e) {
      row.note = std::string("excluded: ") + e.what();
    }
    result.rows.push_back(std::move(row));
  }

  for (const auto& r : result.rows) result.included += r.included ? 1 : 0;
  if (result.included == 0) return result;

  result.fitted_ell = fit_ell(result.rows, cfg.classes, 1, 0);
  for (auto& r : result.rows) {
    if (!r.included) continue;
    r.bound = theorem1_lower_bound({r.trigger_norm, r.margin, cfg.classes, result.fitted_ell});
    r.pass = r.ratio >= r.bound;
    result.passed += r.pass ? 1 : 0;
  }

  result.cross_fit_ell = fit_ell(result.rows, cfg.classes, 2, 0);
  std::size_t held = 0, held_pass = 0;
  for (std::size_t i = 1; i < result.rows.size(); i += 2) {
    const auto& r = result.rows[i];
    if (!r.included) continue;
    ++held;
    if (r.ratio >= theorem1_lower_bound({r.trigger_norm, r.margin, cfg.classes, result.cross_fit_ell})) ++held_pass;
  }
  result.cross_pass_rate = held == 0 ? 0.0 : static_cast<double>(held_pass) / static_cast<double>(held);
  return result;
}

void write_sweep_csv(const SweepResult& result, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(10);
  out << "seed,tau_achieved,trigger_norm,ratio,bound,status\n";
  for (const auto& r : result.rows) {
    out << r.seed << ',';
    if (r.included) {
      out << r.margin << ',' << r.trigger_norm << ',' << r.ratio << ',' << r.bound << ','
          << (r.pass ? "pass" : "fail") << '\n';
    } else {
      out << ',' << r.trigger_norm << ",,,excluded\n";
    }
  }
}

}  // namespace forge
