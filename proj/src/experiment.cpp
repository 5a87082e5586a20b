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

#include "forge/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "forge/checkpoint.hpp"
#include "forge/error.hpp"
#include "forge/hash.hpp"

namespace forge {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::none:
      return "none";
    case DefenseKind::pbe:
      return "pbe";
    case DefenseKind::pbe_with_clean:
      return "pbe_with_clean";
    case DefenseKind::baseline_finetune:
      return "baseline_finetune";
  }
  return "none";
}

DefenseKind parse_defense(std::string_view name) {
  if (name == "none") return DefenseKind::none;
  if (name == "pbe") return DefenseKind::pbe;
  if (name == "pbe_with_clean") return DefenseKind::pbe_with_clean;
  if (name == "baseline" || name == "baseline_finetune") return DefenseKind::baseline_finetune;
  throw ValidationError("unknown defense '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- data

void DataSourceConfig::validate() const {
  if (source != "synthetic" && source != "cifar10") throw ValidationError("data source must be synthetic or cifar10");
  if (train_size == 0 || test_size == 0) throw ValidationError("split sizes must be positive");
  if (!(noise >= 0.0f)) throw ValidationError("noise must be >= 0");
  if (!(min_contrast >= 0.0f && min_contrast < 1.0f)) throw ValidationError("min_contrast must lie in [0,1)");
}

json DataSourceConfig::to_json() const {
  json j{{"source", source}, {"train_size", train_size}, {"test_size", test_size}};
  if (source == "synthetic") {
    j["seed"] = seed;
    j["noise"] = noise;
    j["min_contrast"] = min_contrast;
  } else {
    j["root"] = root;
  }
  return j;
}

DataSourceConfig DataSourceConfig::from_json(const json& j) {
  DataSourceConfig c;
  try {
    c.source = j.value("source", c.source);
    c.train_size = j.value("train_size", c.train_size);
    c.test_size = j.value("test_size", c.test_size);
    c.seed = j.value("seed", c.seed);
    c.noise = j.value("noise", c.noise);
    c.min_contrast = j.value("min_contrast", c.min_contrast);
    c.root = j.value("root", c.root);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed data config: ") + e.what());
  }
  c.validate();
  return c;
}

Splits load_splits(const DataSourceConfig& cfg) {
  cfg.validate();
  if (cfg.source == "cifar10") {
    fs::path root = cfg.root;
    if (root.empty()) {
      const char* env = std::getenv(kDataRootEnv);
      if (env == nullptr) throw ValidationError(std::string("no CIFAR-10 root given and ") + kDataRootEnv + " is unset");
      root = env;
    }
    return {load_cifar10(root, true, cfg.train_size), load_cifar10(root, false, cfg.test_size)};
  }
  SyntheticConfig sc;
  sc.noise = cfg.noise;
  sc.min_contrast = cfg.min_contrast;
  sc.count = cfg.train_size;
  sc.seed = cfg.seed;
  Splits s;
  s.train = make_synthetic_shapes(sc);
  sc.count = cfg.test_size;
  sc.seed = mix_seed(cfg.seed, 1);
  s.test = make_synthetic_shapes(sc);
  return s;
}

// ---------------------------------------------------------------- trigger

void TriggerRecipe::validate() const {
  const auto k = parse_trigger_kind(kind);
  if (k == TriggerKind::additive) throw ValidationError("additive triggers are configured through the theory command");
  if (patch_size < 1) throw ValidationError("patch size must be >= 1");
  if (cell < 1) throw ValidationError("blend cell must be >= 1");
}

TriggerSpec TriggerRecipe::build(ImageShape shape) const {
  validate();
  switch (parse_trigger_kind(kind)) {
    case TriggerKind::patch:
      return TriggerSpec::badnets(shape, patch_size, patch_value);
    case TriggerKind::blend:
      return TriggerSpec::blend_noise(shape, pattern_seed, alpha, cell);
    case TriggerKind::sinusoid:
      return TriggerSpec::sig(shape, amplitude, frequency);
    case TriggerKind::additive:
      break;
  }
  throw ValidationError("unsupported trigger kind '" + kind + "'");
}

json TriggerRecipe::to_json() const {
  // Only the parameters of the chosen kind, so unrelated fields do not move
  // the hash.
  json j{{"kind", kind}};
  switch (parse_trigger_kind(kind)) {
    case TriggerKind::patch:
      j["patch_size"] = patch_size;
      j["patch_value"] = patch_value;
      break;
    case TriggerKind::blend:
      j["alpha"] = alpha;
      j["pattern_seed"] = pattern_seed;
      j["cell"] = cell;
      break;
    case TriggerKind::sinusoid:
      j["amplitude"] = amplitude;
      j["frequency"] = frequency;
      break;
    case TriggerKind::additive:
      break;
  }
  return j;
}

TriggerRecipe TriggerRecipe::from_json(const json& j) {
  TriggerRecipe r;
  try {
    r.kind = j.value("kind", r.kind);
    r.patch_size = j.value("patch_size", r.patch_size);
    r.patch_value = j.value("patch_value", r.patch_value);
    r.alpha = j.value("alpha", r.alpha);
    r.pattern_seed = j.value("pattern_seed", r.pattern_seed);
    r.cell = j.value("cell", r.cell);
    r.amplitude = j.value("amplitude", r.amplitude);
    r.frequency = j.value("frequency", r.frequency);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed trigger config: ") + e.what());
  }
  r.validate();
  return r;
}

// ---------------------------------------------------------------- config

ExperimentConfig ExperimentConfig::desk(std::string_view attack, DefenseKind defense) {
  ExperimentConfig c;
  c.name = std::string(attack) + "-" + std::string(to_string(defense));
  c.trigger.kind = std::string(attack);
  c.trigger.validate();
  c.defense = defense;
  c.poison.target = 0;
  c.poison.ratio = 0.1;
  c.poison.seed = 4;

  c.train.epochs = 20;
  c.train.learning_rate = 0.02f;
  c.train.lr_step_epochs = 14;
  c.train.seed = 3;

  // The visible patch needs a larger budget and a faster clean phase.
  const bool patch = parse_trigger_kind(attack) == TriggerKind::patch;
  PurifyConfig& p = c.clean_extra_purify;
  p = PurifyConfig::defaults();
  p.attack.epsilon = (patch ? 24.0f : 16.0f) / 255.0f;
  p.attack.step_size = p.attack.epsilon / 4.0f;
  p.adversarial_finetune.epochs = 3;
  p.adversarial_finetune.learning_rate = 0.005f;
  p.clean_finetune.epochs = 20;
  p.clean_finetune.learning_rate = patch ? 0.02f : 0.01f;

  c.baseline = p.clean_finetune;
  c.baseline.epochs = p.adversarial_finetune.epochs + p.clean_finetune.epochs;

  c.pbe.seed = 7;
  PurifyConfig& q = c.pbe.purify;
  q = PurifyConfig::defaults();
  q.attack.epsilon = 16.0f / 255.0f;
  q.attack.step_size = 4.0f / 255.0f;
  q.adversarial_finetune.epochs = 3;
  q.adversarial_finetune.learning_rate = 0.01f;
  q.clean_finetune = q.adversarial_finetune;

  c.output_dir = fs::path("runs") / c.name;
  return c;
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ValidationError("experiment name is empty");
  data.validate();
  trigger.validate();
  poison.validate(10);
  (void)ArchSpec::parse(arch, ImageShape{}, 10);
  train.validate();
  pbe.validate();
  clean_extra_purify.validate();
  baseline.validate();
  if (!(clean_extra_fraction > 0.0 && clean_extra_fraction <= 1.0)) {
    throw ValidationError("clean extra fraction must lie in (0,1]");
  }
}

json ExperimentConfig::to_json() const {
  return json{{"name", name},
              {"data", data.to_json()},
              {"trigger", trigger.to_json()},
              {"poison", poison.to_json()},
              {"arch", arch},
              {"train", train.to_json()},
              {"defense", std::string(to_string(defense))},
              {"pbe", pbe.to_json()},
              {"clean_extra_purify", clean_extra_purify.to_json()},
              {"baseline", baseline.to_json()},
              {"clean_extra_fraction", clean_extra_fraction},
              {"clean_extra_seed", clean_extra_seed}};
}

ExperimentConfig ExperimentConfig::from_json(const json& user) {
  if (!user.is_object()) throw ValidationError("experiment config must be an object");
  ExperimentConfig c;
  try {
    // Missing fields, nested ones included, take the desk protocol for the
    // named attack and defense.
    const std::string attack =
        user.contains("trigger") ? user["trigger"].value("kind", std::string("blend")) : std::string("blend");
    const DefenseKind defense =
        user.contains("defense") ? parse_defense(user["defense"].get<std::string>()) : DefenseKind::pbe;
    json j = desk(attack, defense).to_json();
    j["name"] = "experiment";
    j.merge_patch(user);

    c.name = j.at("name").get<std::string>();
    c.data = DataSourceConfig::from_json(j.at("data"));
    c.trigger = TriggerRecipe::from_json(j.at("trigger"));
    c.poison = PoisonPlan::from_json(j.at("poison"));
    c.arch = j.at("arch").get<std::string>();
    c.train = TrainConfig::from_json(j.at("train"));
    c.defense = parse_defense(j.at("defense").get<std::string>());
    c.pbe = PbeConfig::from_json(j.at("pbe"));
    c.clean_extra_purify = PurifyConfig::from_json(j.at("clean_extra_purify"));
    c.baseline = TrainConfig::from_json(j.at("baseline"));
    c.clean_extra_fraction = j.at("clean_extra_fraction").get<double>();
    c.clean_extra_seed = j.at("clean_extra_seed").get<std::uint64_t>();
    c.output_dir = j.contains("output_dir") ? fs::path(j["output_dir"].get<std::string>()) : fs::path("runs") / c.name;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void ExperimentConfig::save(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json().dump(2) << "\n";
}

std::string ExperimentConfig::hash() const { return to_hex(fnv1a64(to_json().dump())); }

std::string ExperimentConfig::training_hash() const {
  const json j{{"data", data.to_json()},
               {"trigger", trigger.to_json()},
               {"poison", poison.to_json()},
               {"arch", arch},
               {"train", train.to_json()}};
  return to_hex(fnv1a64(j.dump()));
}

// ---------------------------------------------------------------- record

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

json iteration_json(const IterationReport& r) {
  return json{{"t", r.iteration},
              {"extra_size", r.extra_size},
              {"acc", optional_json(r.acc)},
              {"asr", optional_json(r.asr)},
              {"ap", optional_json(r.ap)},
              {"extra_clean_fraction", optional_json(r.extra_clean_fraction)}};
}

IterationReport iteration_from(const json& j) {
  IterationReport r;
  r.iteration = j.at("t").get<int>();
  r.extra_size = j.at("extra_size").get<std::size_t>();
  r.acc = optional_from(j, "acc");
  r.asr = optional_from(j, "asr");
  r.ap = optional_from(j, "ap");
  r.extra_clean_fraction = optional_from(j, "extra_clean_fraction");
  return r;
}

// Keeps the end points and about `points` evenly spaced entries.
PrCurve thin_curve(const PrCurve& c, std::size_t points) {
  if (c.thresholds.size() <= points) return c;
  PrCurve out;
  out.average_precision = c.average_precision;
  const std::size_t n = c.thresholds.size();
  for (std::size_t k = 0; k < points; ++k) {
    const std::size_t i = k * (n - 1) / (points - 1);
    out.thresholds.push_back(c.thresholds[i]);
    out.precision.push_back(c.precision[i]);
    out.recall.push_back(c.recall[i]);
  }
  return out;
}

}  // namespace

json RunRecord::to_json() const {
  json stages_j = json::array();
  for (const auto& s : stages) {
    stages_j.push_back({{"name", s.name}, {"seconds", s.seconds}, {"cached", s.cached}, {"artifact", s.artifact}});
  }
  json timeline_j = json::array();
  for (const auto& r : timeline) timeline_j.push_back(iteration_json(r));
  json curves_j = json::array();
  for (const auto& c : pr_curves) {
    curves_j.push_back({{"thresholds", c.thresholds},
                        {"precision", c.precision},
                        {"recall", c.recall},
                        {"average_precision", c.average_precision}});
  }
  return json{{"name", name},
              {"config_hash", config_hash},
              {"config", config},
              {"defense", defense},
              {"stages", stages_j},
              {"before", {{"acc", optional_json(before_acc)}, {"asr", optional_json(before_asr)}}},
              {"after", {{"acc", optional_json(after_acc)}, {"asr", optional_json(after_asr)}}},
              {"timeline", timeline_j},
              {"pr_curves", curves_j},
              {"failed_stage", failed_stage},
              {"error", error}};
}

RunRecord RunRecord::from_json(const json& j) {
  RunRecord r;
  try {
    r.name = j.value("name", std::string());
    r.config_hash = j.value("config_hash", std::string());
    r.config = j.value("config", json::object());
    r.defense = j.value("defense", std::string());
    for (const auto& s : j.value("stages", json::array())) {
      r.stages.push_back({s.at("name").get<std::string>(), s.at("seconds").get<double>(), s.at("cached").get<bool>(),
                          s.value("artifact", std::string())});
    }
    const json before = j.value("before", json::object());
    const json after = j.value("after", json::object());
    r.before_acc = optional_from(before, "acc");
    r.before_asr = optional_from(before, "asr");
    r.after_acc = optional_from(after, "acc");
    r.after_asr = optional_from(after, "asr");
    for (const auto& t : j.value("timeline", json::array())) r.timeline.push_back(iteration_from(t));
    for (const auto& c : j.value("pr_curves", json::array())) {
      PrCurve curve;
      curve.thresholds = c.at("thresholds").get<std::vector<double>>();
      curve.precision = c.at("precision").get<std::vector<double>>();
      curve.recall = c.at("recall").get<std::vector<double>>();
      curve.average_precision = c.at("average_precision").get<double>();
      r.pr_curves.push_back(std::move(curve));
    }
    r.failed_stage = j.value("failed_stage", std::string());
    r.error = j.value("error", std::string());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed run record: ") + e.what());
  }
  return r;
}

// ---------------------------------------------------------------- run

namespace {

void write_json(const fs::path& path, const json& j) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write " + tmp.string());
    out << j.dump(2) << "\n";
  }
  fs::rename(tmp, path);
}

std::optional<json> read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    return json::parse(in);
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

class Runner {
 public:
  Runner(const ExperimentConfig& cfg, const RunOptions& options) : cfg_(cfg), options_(options) {
    record_.name = cfg.name;
    record_.config = cfg.to_json();
    record_.config_hash = to_hex(fnv1a64(record_.config.dump()));
    record_.defense = std::string(to_string(cfg.defense));
    cache_ = options.cache_dir.empty() ? cfg.output_dir / "cache" : options.cache_dir;
  }

  RunRecord run() {
    fs::create_directories(cfg_.output_dir);
    cfg_.save(cfg_.output_dir / "config.json");

    const fs::path finished = cache_ / ("run-" + record_.config_hash);
    if (!options_.force) {
      if (auto j = read_json(finished / "record.json")) {
        RunRecord cached = RunRecord::from_json(*j);
        if (cached.complete() && cached.config_hash == record_.config_hash && fs::exists(finished / "purified")) {
          log("reusing finished run " + finished.string());
          for (auto& s : cached.stages) s.cached = true;
          copy_purified(finished / "purified");
          write_json(cfg_.output_dir / "record.json", cached.to_json());
          return cached;
        }
      }
    }

    stage("data", [&] { splits_ = load_splits(cfg_.data); });
    stage("poison", [&] {
      trigger_.emplace(cfg_.trigger.build(splits_.train.shape));
      poisoned_ = poison_dataset(splits_.train, *trigger_, cfg_.poison);
      triggered_test_ = make_triggered_testset(splits_.test, *trigger_, cfg_.poison);
    });
    stage("train", [&] { train_stage(); });
    stage("measure_before", [&] {
      record_.before_acc = evaluate_accuracy(*infected_, splits_.test);
      record_.before_asr = compute_asr(*infected_, triggered_test_);
    });
    stage("defend", [&] { defend_stage(); });
    stage("measure_after", [&] {
      record_.after_acc = evaluate_accuracy(*purified_, splits_.test);
      record_.after_asr = compute_asr(*purified_, triggered_test_);
    });

    fs::create_directories(finished);
    save_checkpoint(*purified_, finished / "purified", json{{"config_hash", record_.config_hash}});
    write_json(finished / "record.json", record_.to_json());
    return record_;
  }

 private:
  template <class F>
  void stage(const std::string& name, F&& body) {
    log("stage " + name);
    const auto t0 = std::chrono::steady_clock::now();
    StageRecord s{name, 0.0, false, {}};
    current_ = &s;
    try {
      body();
    } catch (const std::exception& e) {
      record_.failed_stage = name;
      record_.error = e.what();
      write_json(cfg_.output_dir / "record.json", record_.to_json());
      throw StageError(name, e.what());
    }
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    record_.stages.push_back(s);
    current_ = nullptr;
    write_json(cfg_.output_dir / "record.json", record_.to_json());
  }

  void train_stage() {
    const fs::path dir = cache_ / ("train-" + cfg_.training_hash());
    if (!options_.force && fs::exists(dir / "manifest.json")) {
      infected_.emplace(load_checkpoint(dir).model);
      current_->cached = true;
    } else {
      const ArchSpec arch = ArchSpec::parse(cfg_.arch, poisoned_.shape, poisoned_.class_count);
      TrainResult r = train_classifier(poisoned_, arch, cfg_.train);
      json history = json::array();
      for (const auto& h : r.history) history.push_back({{"epoch", h.epoch}, {"loss", h.mean_loss}, {"acc", h.train_accuracy}});
      save_checkpoint(r.model, dir, json{{"seed", cfg_.train.seed}, {"history", history}});
      infected_.emplace(std::move(r.model));
    }
    current_->artifact = dir.string();
  }

  LabeledImageSet clean_extra() const {
    const auto idx = sample_indices(splits_.train.size(),
                                    fraction_count(cfg_.clean_extra_fraction, splits_.train.size()),
                                    cfg_.clean_extra_seed);
    return splits_.train.subset(idx);
  }

  void defend_stage() {
    switch (cfg_.defense) {
      case DefenseKind::none:
        purified_.emplace(*infected_);
        break;
      case DefenseKind::pbe_with_clean:
        purified_.emplace(pbe_with_clean_extra(*infected_, clean_extra(), cfg_.clean_extra_purify));
        break;
      case DefenseKind::baseline_finetune:
        purified_.emplace(baseline_finetune(*infected_, clean_extra(), cfg_.baseline));
        break;
      case DefenseKind::pbe: {
        // The defense sees the training set without its ground-truth mask.
        LabeledImageSet blind = poisoned_;
        blind.poison_mask.clear();
        std::vector<std::uint8_t> clean_mask(poisoned_.size());
        for (std::size_t i = 0; i < clean_mask.size(); ++i) clean_mask[i] = poisoned_.poison_mask[i] ? 0 : 1;
        const bool has_clean = std::find(clean_mask.begin(), clean_mask.end(), 1) != clean_mask.end();
        auto observer = [&](const Network& model, const CleanRanking& ranking,
                            const std::vector<std::size_t>& extra, IterationReport& report) {
          report.acc = evaluate_accuracy(model, splits_.test);
          report.asr = compute_asr(model, triggered_test_);
          std::size_t clean = 0;
          for (std::size_t i : extra) clean += clean_mask[i];
          report.extra_clean_fraction = static_cast<double>(clean) / static_cast<double>(extra.size());
          if (has_clean) {
            const PrCurve curve = precision_recall_ap(ranking.scores, clean_mask);
            report.ap = curve.average_precision;
            record_.pr_curves.push_back(thin_curve(curve, 200));
          }
          record_.timeline.push_back(report);
          log("  iteration " + std::to_string(report.iteration) + " acc " + std::to_string(*report.acc) + " asr " +
              std::to_string(*report.asr));
          write_json(cfg_.output_dir / "record.json", record_.to_json());
        };
        purified_.emplace(pbe_run(*infected_, blind, cfg_.pbe, observer).purified);
        break;
      }
    }
    save_checkpoint(*purified_, cfg_.output_dir / "purified", json{{"config_hash", record_.config_hash}});
    current_->artifact = (cfg_.output_dir / "purified").string();
  }

  void copy_purified(const fs::path& from) {
    const fs::path to = cfg_.output_dir / "purified";
    fs::create_directories(to);
    for (const auto& e : fs::directory_iterator(from)) {
      fs::copy_file(e.path(), to / e.path().filename(), fs::copy_options::overwrite_existing);
    }
  }

  void log(const std::string& msg) const {
    if (options_.log) options_.log(msg);
  }

  const ExperimentConfig& cfg_;
  const RunOptions& options_;
  fs::path cache_;
  RunRecord record_;
  StageRecord* current_ = nullptr;
  Splits splits_;
  std::optional<TriggerSpec> trigger_;
  LabeledImageSet poisoned_;
  LabeledImageSet triggered_test_;
  std::optional<Network> infected_;
  std::optional<Network> purified_;
};

}  // namespace

RunRecord run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  return Runner(cfg, options).run();
}

// ---------------------------------------------------------------- grid

json desk_grid_spec() {
  json per_attack = json::object();
  for (std::string_view a : kGridAttacks) {
    const ExperimentConfig c = ExperimentConfig::desk(a, DefenseKind::none);
    per_attack[std::string(a)] = {{"trigger", c.trigger.to_json()},
                                  {"clean_extra_purify", c.clean_extra_purify.to_json()},
                                  {"baseline", c.baseline.to_json()}};
  }
  json base = ExperimentConfig::desk("blend", DefenseKind::none).to_json();
  base["name"] = "grid";
  return json{{"base", base}, {"per_attack", per_attack}};
}

ExperimentConfig grid_cell_config(const json& spec, std::string_view attack, DefenseKind defense) {
  json j = spec.contains("base") ? spec["base"] : spec;
  if (spec.contains("per_attack") && spec["per_attack"].contains(std::string(attack))) {
    j.merge_patch(spec["per_attack"][std::string(attack)]);
  }
  j["trigger"]["kind"] = std::string(attack);
  j["defense"] = std::string(to_string(defense));
  j["name"] = j.value("name", std::string("grid")) + "-" + std::string(attack) + "-" + std::string(to_string(defense));
  j.erase("output_dir");
  return ExperimentConfig::from_json(j);
}

GridResult run_grid(const json& spec, const fs::path& out, const RunOptions& options) {
  // Validate every cell before the first one starts training.
  std::vector<GridCell> pending;
  std::vector<ExperimentConfig> configs;
  for (std::string_view a : kGridAttacks) {
    for (DefenseKind d : kGridDefenses) {
      ExperimentConfig c = grid_cell_config(spec, a, d);
      c.output_dir = out / (std::string(a) + "_" + std::string(to_string(d)));
      configs.push_back(std::move(c));
      pending.push_back(GridCell{std::string(a), d, {}});
    }
  }
  RunOptions shared = options;
  if (shared.cache_dir.empty()) shared.cache_dir = out / "cache";
  GridResult result;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    pending[i].record = run_experiment(configs[i], shared);
    result.cells.push_back(std::move(pending[i]));
  }
  return result;
}

}  // namespace forge
