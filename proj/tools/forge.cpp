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

// forge: command-line front end.
//
// Exit codes: 0 success, 2 invalid arguments or configuration, 3 a stage or
// I/O failure.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "forge/attack.hpp"
#include "forge/checkpoint.hpp"
#include "forge/dataset.hpp"
#include "forge/diagnostics.hpp"
#include "forge/error.hpp"
#include "forge/experiment.hpp"
#include "forge/hash.hpp"
#include "forge/pbe.hpp"
#include "forge/poison.hpp"
#include "forge/report.hpp"
#include "forge/theory.hpp"
#include "forge/training.hpp"
#include "forge/trigger.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace forge;

namespace {

void note(const std::string& msg) { std::cerr << "[forge] " << msg << std::endl; }

std::vector<double> parse_schedule(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError("bad schedule entry '" + item + "'");
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

json iteration_row(const IterationReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"t", r.iteration}, {"acc", opt(r.acc)}, {"asr", opt(r.asr)}, {"ap", opt(r.ap)}, {"extra_size", r.extra_size}};
}

// ------------------------------------------------------------------ data
struct DataArgs {
  std::string source = "synthetic";
  std::string split = "train";
  std::size_t count = 20000;
  std::uint64_t seed = 1;
  float noise = 0.05f;
  std::string root;
  std::string out;
};

void run_data(const DataArgs& a) {
  LabeledImageSet data;
  if (a.source == "cifar10") {
    std::string root = a.root;
    if (root.empty()) {
      const char* env = std::getenv(kDataRootEnv);
      if (!env) throw ValidationError(std::string("--root not given and ") + kDataRootEnv + " is unset");
      root = env;
    }
    data = load_cifar10(root, a.split == "train", a.count);
  } else {
    SyntheticConfig sc;
    sc.count = a.count;
    sc.seed = a.seed;
    sc.noise = a.noise;
    data = make_synthetic_shapes(sc);
  }
  save_dataset(data, a.out, a.seed);
  note("wrote " + std::to_string(data.size()) + " samples to " + a.out);
}

// ------------------------------------------------------------------ poison
struct PoisonArgs {
  std::string dataset;
  std::string trigger = "patch";
  std::string mode = "all2one:0";
  double ratio = 0.1;
  std::uint64_t seed = 0;
  float alpha = 0.15f;
  std::uint64_t pattern_seed = 5;
  float additive_scale = 0.05f;
  bool clean_label = false;
  bool test_set = false;
  std::string out;
};

TriggerSpec build_trigger(const PoisonArgs& a, ImageShape shape) {
  switch (parse_trigger_kind(a.trigger)) {
    case TriggerKind::patch:
      return TriggerSpec::badnets(shape);
    case TriggerKind::blend:
      return TriggerSpec::blend_noise(shape, a.pattern_seed, a.alpha);
    case TriggerKind::sinusoid:
      return TriggerSpec::sig(shape);
    case TriggerKind::additive: {
      std::mt19937_64 rng(a.pattern_seed);
      std::uniform_real_distribution<float> u(-a.additive_scale, a.additive_scale);
      std::vector<float> p(shape.size());
      for (auto& v : p) v = u(rng);
      return TriggerSpec::additive(shape, std::move(p));
    }
  }
  throw ValidationError("unknown trigger");
}

void run_poison(const PoisonArgs& a) {
  const LabeledImageSet clean = load_dataset(a.dataset);
  PoisonPlan plan = PoisonPlan::parse_mode(a.mode);
  plan.ratio = a.ratio;
  plan.seed = a.seed;
  plan.clean_label = a.clean_label;
  plan.validate(clean.class_count);
  const TriggerSpec trigger = build_trigger(a, clean.shape);
  const LabeledImageSet out = a.test_set ? make_triggered_testset(clean, trigger, plan)
                                         : poison_dataset(clean, trigger, plan);
  save_dataset(out, a.out, a.seed);
  write_text(fs::path(a.out) / "trigger.json",
             json{{"trigger", trigger.to_json()}, {"plan", plan.to_json()}}.dump(2) + "\n");
  std::size_t marked = 0;
  for (auto m : out.poison_mask) marked += m;
  note(a.test_set ? "wrote triggered test set to " + a.out
                  : "poisoned " + std::to_string(marked) + " of " + std::to_string(out.size()) + " samples");
}

// ------------------------------------------------------------------ train
struct TrainArgs {
  std::string data;
  std::string arch = "cnn:8,16/leak=0.1";
  TrainConfig cfg;
  std::string out;
};

void run_train(TrainArgs a) {
  const LabeledImageSet data = load_dataset(a.data);
  const ArchSpec arch = ArchSpec::parse(a.arch, data.shape, data.class_count);
  a.cfg.validate();
  TrainResult r = train_classifier(data, arch, a.cfg);
  json history = json::array();
  for (const auto& h : r.history) {
    history.push_back({{"epoch", h.epoch}, {"loss", h.mean_loss}, {"acc", h.train_accuracy}});
    note("epoch " + std::to_string(h.epoch) + " loss " + std::to_string(h.mean_loss));
  }
  save_checkpoint(r.model, a.out, json{{"seed", a.cfg.seed}, {"train", a.cfg.to_json()}, {"history", history}});
  note("train accuracy " + std::to_string(r.train_accuracy) + ", checkpoint in " + a.out);
}

// ------------------------------------------------------------------ attack
struct AttackArgs {
  std::string ckpt;
  std::string data;
  AdvConfig cfg;
  float step_size = -1.0f;  // default eps / 4
  std::string out;
};

void run_attack(AttackArgs a) {
  const Network model = load_checkpoint(a.ckpt).model;
  const LabeledImageSet data = load_dataset(a.data);
  a.cfg.step_size = a.step_size > 0.0f ? a.step_size : a.cfg.epsilon / 4.0f;
  a.cfg.validate();
  const LabeledImageSet adv = attack_batch(model, data, a.cfg);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < adv.size(); ++i) flipped += model.predict(adv.image(i)) != adv.labels[i];
  save_dataset(adv, a.out, a.cfg.seed);
  std::cout << "attack success " << static_cast<double>(flipped) / static_cast<double>(adv.size()) << "\n";
}

// ------------------------------------------------------------------ histogram
struct HistArgs {
  std::string ckpt;
  std::string data;
  std::string mode = "all2one:0";
  AdvConfig cfg;
  std::string out;
};

void run_histogram(HistArgs a) {
  const Network model = load_checkpoint(a.ckpt).model;
  const LabeledImageSet data = load_dataset(a.data);
  a.cfg.step_size = a.cfg.epsilon / 4.0f;
  const LabelHistogram h = adv_target_histogram(model, data, a.cfg, PoisonPlan::parse_mode(a.mode));
  write_histogram_csv(h, a.out);
  for (int r = 0; r < h.classes; ++r) {
    if (h.row_total(r) == 0) continue;
    std::cout << "row " << r << ": target frequency " << h.frequency(r, r) << ", max " << h.row_max_frequency(r) << "\n";
  }
}

// ------------------------------------------------------------------ defend
struct DefendArgs {
  std::string method = "pbe";
  std::string ckpt;
  std::string train_data;
  std::string clean_extra;
  std::string test_data;
  std::string triggered_test;
  int iters = 5;
  std::string schedule = "0.1,0.2,0.4,0.55,0.7";
  float eps = 16.0f / 255.0f;
  int adv_epochs = 3;
  float adv_lr = 0.01f;
  int clean_epochs = 3;
  float clean_lr = 0.01f;
  std::uint64_t seed = 7;
  std::string out;
};

void run_defend(const DefendArgs& a) {
  const Network infected = load_checkpoint(a.ckpt).model;
  std::optional<LabeledImageSet> test, triggered;
  if (!a.test_data.empty()) test = load_dataset(a.test_data);
  if (!a.triggered_test.empty()) triggered = load_dataset(a.triggered_test);

  PurifyConfig purify = PurifyConfig::defaults();
  purify.attack.epsilon = a.eps;
  purify.attack.step_size = a.eps / 4.0f;
  purify.adversarial_finetune.epochs = a.adv_epochs;
  purify.adversarial_finetune.learning_rate = a.adv_lr;
  purify.clean_finetune = purify.adversarial_finetune;
  purify.clean_finetune.epochs = a.clean_epochs;
  purify.clean_finetune.learning_rate = a.clean_lr;
  purify.validate();

  json iterations = json::array();
  std::optional<Network> purified;
  auto measure = [&](const Network& m, IterationReport& r) {
    if (test) r.acc = evaluate_accuracy(m, *test);
    if (triggered) r.asr = compute_asr(m, *triggered);
  };

  if (a.method == "finetune") {
    if (a.clean_extra.empty()) throw ValidationError("finetune needs --clean-extra");
    TrainConfig ft = purify.clean_finetune;
    ft.epochs = a.adv_epochs + a.clean_epochs;
    purified.emplace(baseline_finetune(infected, load_dataset(a.clean_extra), ft));
  } else if (!a.clean_extra.empty()) {
    purified.emplace(pbe_with_clean_extra(infected, load_dataset(a.clean_extra), purify));
  } else {
    if (a.train_data.empty()) throw ValidationError("pbe without --clean-extra needs --train-data");
    LabeledImageSet train = load_dataset(a.train_data);
    // Ground truth, if the dataset carries it, stays on the reporting side.
    std::vector<std::uint8_t> clean_mask;
    for (auto m : train.poison_mask) clean_mask.push_back(m ? 0 : 1);
    train.poison_mask.clear();
    PbeConfig cfg;
    cfg.iterations = a.iters;
    cfg.schedule = parse_schedule(a.schedule);
    cfg.purify = purify;
    cfg.seed = a.seed;
    cfg.validate();
    auto observer = [&](const Network& m, const CleanRanking& ranking, const std::vector<std::size_t>&,
                        IterationReport& r) {
      measure(m, r);
      if (std::find(clean_mask.begin(), clean_mask.end(), 1) != clean_mask.end()) {
        r.ap = precision_recall_ap(ranking.scores, clean_mask).average_precision;
      }
      iterations.push_back(iteration_row(r));
      note("iteration " + std::to_string(r.iteration) + " " + iteration_row(r).dump());
    };
    purified.emplace(pbe_run(infected, train, cfg, observer).purified);
  }

  IterationReport final_report;
  measure(*purified, final_report);
  fs::create_directories(a.out);
  save_checkpoint(*purified, fs::path(a.out) / "purified", json{{"method", a.method}});
  const json report{{"method", a.method},
                    {"iterations", iterations},
                    {"final", {{"acc", iteration_row(final_report)["acc"]}, {"asr", iteration_row(final_report)["asr"]}}}};
  write_text(fs::path(a.out) / "report.json", report.dump(2) + "\n");
  std::cout << report["final"].dump() << "\n";
}

// ------------------------------------------------------------------ theory
struct TheoryArgs {
  TheorySweepConfig cfg;
  std::string out = "theory.csv";
};

void run_theory(const TheoryArgs& a) {
  const SweepResult r = run_theory_sweep(a.cfg);
  write_sweep_csv(r, a.out);
  const double limit = theorem1_lower_bound({1.0, a.cfg.tau, a.cfg.classes, std::numeric_limits<double>::infinity()});
  std::cout << "instances included " << r.included << " of " << r.rows.size() << " drawn\n"
            << "fitted l " << r.fitted_ell << ", passing " << r.passed << "/" << r.included << "\n"
            << "cross-fit l " << r.cross_fit_ell << ", held-out pass rate " << r.cross_pass_rate << "\n"
            << "bound limit as |P| grows " << limit << "\n";
}

// ------------------------------------------------------------------ report
void run_report(const std::string& run_dir, const std::string& out, bool plots) {
  std::ifstream in(fs::path(run_dir) / "record.json");
  if (!in) throw ValidationError("no record.json in " + run_dir);
  const RunRecord record = RunRecord::from_json(json::parse(in));
  const fs::path dest = out.empty() ? fs::path(run_dir) / "report" : fs::path(out);
  const ReportBundle b = export_report(record, dest, plots);
  for (const auto& w : b.warnings) note("warning: " + w);
  for (const auto& f : b.files) std::cout << f.string() << "\n";
}

void print_record(const RunRecord& r) {
  auto pct = [](const std::optional<double>& v) { return v ? std::to_string(100.0 * *v) : std::string("-"); };
  std::cout << r.name << " [" << r.config_hash << "] before acc " << pct(r.before_acc) << " asr " << pct(r.before_asr)
            << " | after acc " << pct(r.after_acc) << " asr " << pct(r.after_asr) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"forge: backdoor planting, purification and diagnostics"};
  app.require_subcommand(1);

  DataArgs data_args;
  auto* data = app.add_subcommand("data", "generate or import a dataset");
  data->add_option("--source", data_args.source)->check(CLI::IsMember({"synthetic", "cifar10"}));
  data->add_option("--split", data_args.split)->check(CLI::IsMember({"train", "test"}));
  data->add_option("--count", data_args.count);
  data->add_option("--seed", data_args.seed);
  data->add_option("--noise", data_args.noise);
  data->add_option("--root", data_args.root, "CIFAR-10 directory (default $FORGE_DATA_ROOT)");
  data->add_option("--out", data_args.out)->required();

  PoisonArgs poison_args;
  auto* poison = app.add_subcommand("poison", "plant a trigger into a dataset");
  poison->add_option("--dataset", poison_args.dataset)->required();
  poison->add_option("--trigger", poison_args.trigger)
      ->check(CLI::IsMember({"patch", "badnets", "blend", "sig", "additive"}));
  poison->add_option("--mode", poison_args.mode, "all2one:<label> or all2all");
  poison->add_option("--ratio", poison_args.ratio);
  poison->add_option("--seed", poison_args.seed);
  poison->add_option("--alpha", poison_args.alpha, "blend weight");
  poison->add_option("--pattern-seed", poison_args.pattern_seed);
  poison->add_option("--additive-scale", poison_args.additive_scale);
  poison->add_flag("--clean-label", poison_args.clean_label);
  poison->add_flag("--test-set", poison_args.test_set, "trigger every sample and relabel to the target (ASR set)");
  poison->add_option("--out", poison_args.out)->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a classifier");
  train->add_option("--data", train_args.data)->required();
  train->add_option("--arch", train_args.arch);
  train->add_option("--epochs", train_args.cfg.epochs);
  train->add_option("--lr", train_args.cfg.learning_rate);
  train->add_option("--batch", train_args.cfg.batch_size);
  train->add_option("--lr-step", train_args.cfg.lr_step_epochs);
  train->add_option("--seed", train_args.cfg.seed);
  train->add_option("--out", train_args.out)->required();

  AttackArgs attack_args;
  auto* attack = app.add_subcommand("attack", "untargeted PGD on every sample");
  attack->add_option("--ckpt", attack_args.ckpt)->required();
  attack->add_option("--data", attack_args.data)->required();
  attack->add_option("--eps", attack_args.cfg.epsilon);
  attack->add_option("--steps", attack_args.cfg.steps);
  attack->add_option("--step-size", attack_args.step_size);
  std::string attack_norm = "linf";
  attack->add_option("--norm", attack_norm)->check(CLI::IsMember({"linf", "l2"}));
  attack->add_option("--seed", attack_args.cfg.seed);
  attack->add_option("--out", attack_args.out)->required();

  HistArgs hist_args;
  auto* hist = app.add_subcommand("histogram", "adversarial label histogram of a model");
  hist->add_option("--ckpt", hist_args.ckpt)->required();
  hist->add_option("--data", hist_args.data)->required();
  hist->add_option("--mode", hist_args.mode);
  hist->add_option("--eps", hist_args.cfg.epsilon);
  hist->add_option("--steps", hist_args.cfg.steps);
  hist->add_option("--out", hist_args.out)->required();

  DefendArgs defend_args;
  auto* defend = app.add_subcommand("defend", "purify an infected model");
  defend->add_option("method", defend_args.method)->check(CLI::IsMember({"pbe", "finetune"}));
  defend->add_option("--ckpt", defend_args.ckpt)->required();
  defend->add_option("--train-data", defend_args.train_data);
  defend->add_option("--clean-extra", defend_args.clean_extra);
  defend->add_option("--test-data", defend_args.test_data);
  defend->add_option("--triggered-test", defend_args.triggered_test);
  defend->add_option("--iters", defend_args.iters);
  defend->add_option("--schedule", defend_args.schedule);
  defend->add_option("--eps", defend_args.eps);
  defend->add_option("--adv-epochs", defend_args.adv_epochs);
  defend->add_option("--adv-lr", defend_args.adv_lr);
  defend->add_option("--clean-epochs", defend_args.clean_epochs);
  defend->add_option("--clean-lr", defend_args.clean_lr);
  defend->add_option("--seed", defend_args.seed);
  defend->add_option("--out", defend_args.out)->required();

  TheoryArgs theory_args;
  auto* theory = app.add_subcommand("theory", "linear-model projection sweep");
  theory->add_option("--sweep", theory_args.cfg.instances);
  theory->add_option("--dim", theory_args.cfg.dim);
  theory->add_option("--classes", theory_args.cfg.classes);
  theory->add_option("--tau", theory_args.cfg.tau);
  theory->add_option("--seed", theory_args.cfg.seed);
  theory->add_option("--out", theory_args.out);

  std::string report_run, report_out;
  bool report_plots = false;
  auto* report = app.add_subcommand("report", "export a run record");
  report->add_option("--run", report_run)->required();
  report->add_option("--out", report_out);
  report->add_flag("--plots", report_plots);

  std::string run_config, run_out;
  bool run_force = false;
  auto* run = app.add_subcommand("run", "run one experiment config");
  run->add_option("--config", run_config)->required();
  run->add_option("--out", run_out);
  run->add_flag("--force", run_force);

  std::string grid_config, grid_out = "runs/grid", grid_spec_out;
  bool grid_force = false;
  auto* grid = app.add_subcommand("grid", "attack x defense grid");
  grid->add_option("--config", grid_config, "grid spec (default: desk protocol)");
  grid->add_option("--out", grid_out);
  grid->add_option("--write-spec", grid_spec_out, "write the default spec and exit");
  grid->add_flag("--force", grid_force);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*data) run_data(data_args);
    if (*poison) run_poison(poison_args);
    if (*train) run_train(train_args);
    if (*attack) {
      attack_args.cfg.norm = parse_norm(attack_norm);
      run_attack(attack_args);
    }
    if (*hist) run_histogram(hist_args);
    if (*defend) run_defend(defend_args);
    if (*theory) run_theory(theory_args);
    if (*report) run_report(report_run, report_out, report_plots);
    if (*run) {
      ExperimentConfig cfg = ExperimentConfig::load(run_config);
      if (!run_out.empty()) cfg.output_dir = run_out;
      RunOptions opts;
      opts.force = run_force;
      opts.log = note;
      print_record(run_experiment(cfg, opts));
    }
    if (*grid) {
      json spec = desk_grid_spec();
      if (!grid_config.empty()) {
        std::ifstream in(grid_config);
        if (!in) throw ValidationError("cannot open " + grid_config);
        try {
          spec = json::parse(in);
        } catch (const json::exception& e) {
          throw ValidationError(std::string("grid spec is not valid JSON: ") + e.what());
        }
      }
      if (!grid_spec_out.empty()) {
        write_text(grid_spec_out, spec.dump(2) + "\n");
        return 0;
      }
      RunOptions opts;
      opts.force = grid_force;
      opts.log = note;
      const GridResult g = run_grid(spec, grid_out, opts);
      for (const auto& c : g.cells) print_record(c.record);
      write_grid_table(g, fs::path(grid_out) / "table.csv");
      std::cout << "table: " << (fs::path(grid_out) / "table.csv").string() << "\n";
    }
  } catch (const ValidationError& e) {
    std::cerr << "forge: invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "forge: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
