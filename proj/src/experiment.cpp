// Copyright 2026 The labelfill Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "labelfill/experiment.hpp"

#include <cblas.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "labelfill/error.hpp"
#include "labelfill/format.hpp"
#include "labelfill/io.hpp"
#include "labelfill/rng.hpp"
#include "labelfill/svg.hpp"

namespace labelfill {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {


void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require(j.is_object(), ErrorKind::Configuration, where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    require(ok, ErrorKind::Configuration, "unknown configuration key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::Configuration, "configuration key '" + where + "." + key + "' has the wrong type");
  }
}

json fractions_json(const SplitFractions& f) { return {{"train", f.train}, {"val", f.val}, {"test", f.test}}; }

json train_json(const TrainConfig& t) {
  return {{"lr", t.lr},
          {"batch", t.batch},
          {"tau", t.tau},
          {"lambda", t.lambda},
          {"beta", t.beta},
          {"epochs_sll", t.epochs_sll},
          {"epochs_seg", t.epochs_seg},
          {"rcn_active_epochs", t.rcn_active_epochs},
          {"channels", t.channels},
          {"one_hot_stack", t.one_hot_stack},
          {"rcn_backbone", to_string(t.rcn_backbone)}};
}

TrainConfig train_from(const json& j) {
  TrainConfig t;
  check_keys(j, {"lr", "batch", "tau", "lambda", "beta", "epochs_sll", "epochs_seg", "rcn_active_epochs", "channels",
                 "one_hot_stack", "rcn_backbone"},
             "train");
  read(j, "lr", t.lr, "train");
  read(j, "batch", t.batch, "train");
  read(j, "tau", t.tau, "train");
  read(j, "lambda", t.lambda, "train");
  read(j, "beta", t.beta, "train");
  read(j, "epochs_sll", t.epochs_sll, "train");
  read(j, "epochs_seg", t.epochs_seg, "train");
  read(j, "rcn_active_epochs", t.rcn_active_epochs, "train");
  read(j, "channels", t.channels, "train");
  read(j, "one_hot_stack", t.one_hot_stack, "train");
  std::string backbone = to_string(t.rcn_backbone);
  read(j, "rcn_backbone", backbone, "train");
  t.rcn_backbone = parse_rcn_backbone(backbone);
  return t;
}

const char* soft_gt_name(SoftGt m) { return m == SoftGt::RaterMean ? "rater_mean" : "per_rater"; }

SoftGt parse_soft_gt(const std::string& name) {
  if (name == "rater_mean") return SoftGt::RaterMean;
  if (name == "per_rater") return SoftGt::PerRater;
  fail(ErrorKind::Configuration, "unknown soft_gt mode '" + name + "' (expected rater_mean or per_rater)");
}


std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h = 14695981039346656037ULL) {
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

void require_dir(const fs::path& dir, const char* produced_by) {
  require(fs::is_directory(dir), ErrorKind::Io,
          "missing input " + dir.string() + " (run '" + produced_by + "' first)");
}

void apply_threads(const ExperimentConfig& c) { openblas_set_num_threads(static_cast<int>(c.threads)); }

void say(const LogSink& log, const std::string& line) {
  if (log) log(line);
}

std::string seed_name(std::uint64_t seed) { return "seed-" + std::to_string(seed); }

struct Workspace {
  Dataset data;
  std::vector<AnnotationStack> stacks;
  std::uint64_t fingerprint = 0;
};

Workspace load_workspace(const ExperimentConfig& c) {
  require_dir(dataset_dir(c), "ingest");
  require_dir(stacks_dir(c), "simulate");
  Workspace w;
  w.data = load_dataset(dataset_dir(c));
  w.stacks = load_stacks(stacks_dir(c) / "stacks.lft");
  require(w.stacks.size() == w.data.size(), ErrorKind::Integrity,
          std::to_string(w.stacks.size()) + " stacks for " + std::to_string(w.data.size()) +
              " images; rerun 'simulate'");
  for (std::size_t k = 0; k < w.stacks.size(); ++k) {
    require(w.stacks[k].height() == w.data.gt_labels[k].height() && w.stacks[k].width() == w.data.gt_labels[k].width(),
            ErrorKind::Integrity, "stack " + std::to_string(k) + " does not match its image extent");
  }
  w.fingerprint = fnv1a(read_file(stacks_dir(c) / "stacks.lft"),
                        fnv1a(read_file(dataset_dir(c) / "manifest.json")));
  return w;
}

std::vector<AnnotationStack> simulate_all(const Dataset& data, std::span<const RaterProfile> profiles) {
  std::vector<AnnotationStack> out;
  out.reserve(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) out.push_back(simulate_stack(data.gt_labels[k], profiles, k));
  return out;
}

struct NoiseStats {
  double average = 0.0;
  std::vector<double> per_rater;
};

NoiseStats noise_stats(const Dataset& data, std::span<const AnnotationStack> stacks) {
  NoiseStats s;
  if (stacks.empty()) return s;
  s.per_rater.assign(stacks[0].raters(), 0.0);
  for (std::size_t k = 0; k < stacks.size(); ++k) {
    for (std::size_t r = 0; r < stacks[k].raters(); ++r) s.per_rater[r] += dsc(stacks[k][r], data.gt_labels[k]);
  }
  double total = 0.0;
  for (double& v : s.per_rater) {
    v /= static_cast<double>(stacks.size());
    total += v;
  }
  s.average = total / static_cast<double>(s.per_rater.size());
  return s;
}

std::vector<std::size_t> eval_indices(const Dataset& data) {
  auto idx = data.indices(Split::Test);
  if (idx.empty()) idx = data.indices(Split::Val);
  require(!idx.empty(), ErrorKind::Usage, "the dataset has no test or validation images to evaluate on");
  return idx;
}

// Training inputs over the train split; the pointers refer into `w`.
struct TrainInputs {
  std::vector<const Tensor*> images;
  std::vector<const AnnotationStack*> stacks;
  Validation validation;
  TrainingSet set;
};

TrainInputs train_inputs(const Dataset& data, std::span<const AnnotationStack> stacks, std::size_t beta,
                         TargetKind target) {
  TrainInputs in;
  const auto train = data.indices(Split::Train);
  require(!train.empty(), ErrorKind::Usage, "the dataset has no training images");
  for (std::size_t k : train) {
    in.images.push_back(&data.images[k]);
    in.stacks.push_back(&stacks[k]);
  }
  for (std::size_t k : data.indices(Split::Val)) {
    in.validation.images.push_back(&data.images[k]);
    in.validation.gt.push_back(&data.gt_labels[k]);
  }
  in.set = make_training_set(in.images, in.stacks, 2, beta, target);
  return in;
}

json phase1_key(const TrainConfig& t, bool masked, std::uint64_t fingerprint) {
  return {{"format", "labelfill-teacher-1"},
          {"lr", t.lr},
          {"batch", t.batch},
          {"beta", t.beta},
          {"epochs_sll", t.epochs_sll},
          {"channels", t.channels},
          {"one_hot_stack", t.one_hot_stack},
          {"seed", t.seed},
          {"masked", masked},
          {"data", std::to_string(fingerprint)}};
}

// Phase-1 teacher, trained once per seed and reused while its inputs match.
ParameterSet cached_teacher(const ExperimentConfig& c, const TrainingSet& set, const TrainConfig& t, bool masked,
                            std::uint64_t fingerprint, const LogSink& log) {
  const fs::path dir = c.out_dir() / "teachers" / (masked ? "masked" : "unmasked") / seed_name(t.seed);
  const json key = phase1_key(t, masked, fingerprint);
  if (fs::exists(dir / "key.json") && read_json(dir / "key.json") == key) {
    say(log, "reusing soft-label teacher " + dir.string());
    return load_checkpoint(dir / "checkpoint");
  }
  say(log, "training soft-label teacher (seed " + std::to_string(t.seed) + ")");
  const PhaseResult p1 = train_phase1(set, t, masked);
  fs::remove_all(dir);
  save_checkpoint(dir / "checkpoint", p1.params, json{{"phase", 1}, {"seed", t.seed}}.dump());
  write_text_atomic(dir / "curve.csv", curve_csv(p1.curve));
  write_text_atomic(dir / "epochs.csv", epoch_csv(p1.epochs));
  write_json(dir / "key.json", key);
  return p1.params;
}

struct TrainedRun {
  PhaseResult result;
  std::size_t teacher_iterations = 0;
};

TrainedRun train_one(const ExperimentConfig& c, const TrainInputs& in, const Variant& v, const TrainConfig& t,
                     std::uint64_t fingerprint, bool cache, const LogSink& log) {
  TrainedRun run;
  Tensor teacher;
  if (v.sls) {
    const ParameterSet theta1 = cache ? cached_teacher(c, in.set, t, v.distill_mask, fingerprint, log)
                                      : train_phase1(in.set, t, v.distill_mask).params;
    teacher = teacher_activations(in.set, t, theta1);
    run.teacher_iterations = iterations_for(t.epochs_sll, in.set.size(), t.batch);
  }
  const auto start = std::chrono::steady_clock::now();
  run.result = train_phase2(in.set, v.sls ? &teacher : nullptr, t, v, &in.validation);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  say(log, "trained " + v.name() + " seed " + std::to_string(t.seed) + ": " + std::to_string(run.result.iterations) +
               " iterations in " + std::to_string(static_cast<long>(secs)) + " s, final epoch loss " +
               format_double(run.result.epochs.empty() ? 0.0 : run.result.epochs.back().mean_loss));
  return run;
}

EvalReport evaluate(const ExperimentConfig& c, const Dataset& data, std::span<const AnnotationStack> stacks,
                    const ParameterSet& params, const std::string& method, std::uint64_t seed) {
  const auto idx = eval_indices(data);
  std::vector<const Tensor*> images;
  for (std::size_t k : idx) images.push_back(&data.images[k]);
  const UNetConfig net = seg_config(c.train, data.images[idx[0]].dim(0), 2);
  require_same_layout(params, build_unet(net, 0));
  const auto probs = predict_probabilities(net, params, images);
  EvalReport rep;
  rep.method = method;
  rep.seed = seed;
  for (std::size_t n = 0; n < idx.size(); ++n) {
    const std::size_t k = idx[n];
    const LabelMap pred = probs[n].argmax();
    const LabelMap& gt = data.gt_labels[k];
    std::optional<SoftScores> soft;
    for (const std::string& m : c.metrics) {
      if (m == "dsc") {
        rep.add(k, m, dsc(pred, gt));
      } else if (m == "iou") {
        rep.add(k, m, iou(pred, gt));
      } else if (m == "bahd") {
        const BahdResult b = bahd(pred, gt);
        rep.add(k, m, b.value, b.sentinel);
      } else {
        if (!soft) soft = soft_metrics(probs[n], stacks[k], c.thresholds, c.soft_gt);
        rep.add(k, m, m == "soft_dsc" ? soft->dsc : soft->iou);
      }
    }
  }
  return rep;
}

void write_report(const fs::path& dir, const EvalReport& rep) {
  write_text_atomic(dir / "report.csv", rep.to_csv());
  write_text_atomic(dir / "report.json", rep.to_json());
}

json aggregate_json(const EvalReport& rep) {
  json j = json::object();
  for (const auto& [name, s] : rep.aggregate()) j[name] = {{"mean", s.mean}, {"std", s.std}, {"flagged", s.flagged}};
  return j;
}

json profiles_json(std::span<const RaterProfile> profiles) {
  json a = json::array();
  for (const auto& p : profiles) a.push_back({{"kind", to_string(p.kind)}, {"strength", p.strength}, {"seed", p.seed}});
  return a;
}

std::vector<RaterProfile> scaled_profiles(std::vector<RaterProfile> profiles, double level) {
  for (auto& p : profiles) {
    if (p.kind == RaterKind::Good || p.kind == RaterKind::Blank) continue;
    p.strength = std::max(1, static_cast<int>(std::lround(level * p.strength)));
  }
  return profiles;
}

}  // namespace


bool DatasetConfig::operator==(const DatasetConfig& o) const {
  return train_images == o.train_images && test_images == o.test_images && train_limit == o.train_limit &&
         test_limit == o.test_limit && fractions.train == o.fractions.train && fractions.val == o.fractions.val &&
         fractions.test == o.fractions.test;
}

bool BoundConfig::operator==(const BoundConfig& o) const {
  return grid.raters == o.grid.raters && grid.dissent == o.grid.dissent && grid.p_min == o.grid.p_min &&
         grid.p_max == o.grid.p_max && lemma_p_r == o.lemma_p_r && lemma_classes == o.lemma_classes &&
         lemma_trials == o.lemma_trials;
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  TrainConfig a = train, b = o.train;
  a.seed = b.seed = 0;
  return dataset == o.dataset && raters == o.raters && a == b && variant == o.variant && fusion == o.fusion &&
         metrics == o.metrics && thresholds == o.thresholds && soft_gt == o.soft_gt &&
         staple.max_iters == o.staple.max_iters && staple.tol == o.staple.tol && output == o.output &&
         seed == o.seed && seeds == o.seeds && threads == o.threads && sweep == o.sweep && bound == o.bound;
}

const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Beta: return "beta";
    case SweepAxis::Lambda: return "lambda";
    case SweepAxis::Tau: return "tau";
    case SweepAxis::NoiseLevel: return "noise_level";
  }
  return "?";
}

SweepAxis parse_sweep_axis(const std::string& name) {
  for (SweepAxis a : {SweepAxis::Beta, SweepAxis::Lambda, SweepAxis::Tau, SweepAxis::NoiseLevel}) {
    if (name == to_string(a)) return a;
  }
  fail(ErrorKind::Usage, "unknown sweep axis '" + name + "' (expected beta, lambda, tau or noise_level)");
}

std::vector<RaterProfile> ExperimentConfig::rater_profiles() const {
  return raters.empty() ? default_profiles(seed) : raters;
}

std::vector<std::uint64_t> ExperimentConfig::run_seeds() const {
  return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
}

void ExperimentConfig::validate() const {
  train.validate();
  Variant::parse(variant).validate();
  require(!metrics.empty(), ErrorKind::Configuration, "metric list is empty");
  for (const auto& m : metrics) {
    require(std::find(known_metrics().begin(), known_metrics().end(), m) != known_metrics().end(),
            ErrorKind::Configuration, "unknown metric '" + m + "' (expected dsc, iou, bahd, soft_dsc or soft_iou)");
  }
  require(!thresholds.empty(), ErrorKind::Configuration, "threshold list is empty");
  for (double t : thresholds) {
    require(t > 0.0 && t < 1.0, ErrorKind::Configuration, "thresholds must lie in (0,1), got " + format_double(t));
  }
  require(threads >= 1, ErrorKind::Configuration, "threads must be at least 1");
  require(!output.empty(), ErrorKind::Configuration, "output directory is empty");
  for (const auto& p : raters) {
    require(p.kind == RaterKind::Good || p.kind == RaterKind::Blank || p.strength >= 1, ErrorKind::Configuration,
            std::string("rater '") + to_string(p.kind) + "' needs strength >= 1");
  }
  const auto& f = dataset.fractions;
  require(f.train >= 0 && f.val >= 0 && f.test >= 0 && std::abs(f.train + f.val + f.test - 1.0) < 1e-9,
          ErrorKind::Configuration, "split fractions must be nonnegative and sum to 1");
  require(staple.max_iters >= 1 && staple.tol > 0, ErrorKind::Configuration, "invalid STAPLE options");
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["dataset"] = {{"train_images", dataset.train_images},
                  {"test_images", dataset.test_images},
                  {"train_limit", dataset.train_limit},
                  {"test_limit", dataset.test_limit},
                  {"fractions", fractions_json(dataset.fractions)}};
  j["raters"] = profiles_json(raters);
  j["train"] = train_json(train);
  j["variant"] = variant;
  j["fusion"] = labelfill::to_string(fusion);
  j["metrics"] = metrics;
  j["thresholds"] = thresholds;
  j["soft_gt"] = soft_gt_name(soft_gt);
  j["staple"] = {{"max_iters", staple.max_iters}, {"tol", staple.tol}};
  j["output"] = output;
  j["seed"] = seed;
  j["seeds"] = seeds;
  j["threads"] = threads;
  j["sweep"] = {{"axis", labelfill::to_string(sweep.axis)}, {"values", sweep.values}, {"variant", sweep.variant}};
  j["bound"] = {{"raters", bound.grid.raters},       {"dissent", bound.grid.dissent},
                {"p_min", bound.grid.p_min},         {"p_max", bound.grid.p_max},
                {"lemma_p_r", bound.lemma_p_r},      {"lemma_classes", bound.lemma_classes},
                {"lemma_trials", bound.lemma_trials}};
  return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("configuration is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  check_keys(j, {"dataset", "raters", "train", "variant", "fusion", "metrics", "thresholds", "soft_gt", "staple",
                 "output", "seed", "seeds", "threads", "sweep", "bound"},
             "config");
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    check_keys(d, {"train_images", "test_images", "train_limit", "test_limit", "fractions"}, "dataset");
    read(d, "train_images", c.dataset.train_images, "dataset");
    read(d, "test_images", c.dataset.test_images, "dataset");
    read(d, "train_limit", c.dataset.train_limit, "dataset");
    read(d, "test_limit", c.dataset.test_limit, "dataset");
    if (d.contains("fractions")) {
      const json& f = d["fractions"];
      check_keys(f, {"train", "val", "test"}, "dataset.fractions");
      read(f, "train", c.dataset.fractions.train, "dataset.fractions");
      read(f, "val", c.dataset.fractions.val, "dataset.fractions");
      read(f, "test", c.dataset.fractions.test, "dataset.fractions");
    }
  }
  if (j.contains("raters")) {
    require(j["raters"].is_array(), ErrorKind::Configuration, "raters must be an array");
    for (const json& r : j["raters"]) {
      check_keys(r, {"kind", "strength", "seed"}, "raters[]");
      RaterProfile p;
      std::string kind = "good";
      read(r, "kind", kind, "raters[]");
      p.kind = parse_rater_kind(kind);
      read(r, "strength", p.strength, "raters[]");
      read(r, "seed", p.seed, "raters[]");
      c.raters.push_back(p);
    }
  }
  if (j.contains("train")) c.train = train_from(j["train"]);
  read(j, "variant", c.variant, "config");
  std::string fusion = labelfill::to_string(c.fusion);
  read(j, "fusion", fusion, "config");
  c.fusion = parse_fusion_method(fusion);
  read(j, "metrics", c.metrics, "config");
  read(j, "thresholds", c.thresholds, "config");
  std::string soft = soft_gt_name(c.soft_gt);
  read(j, "soft_gt", soft, "config");
  c.soft_gt = parse_soft_gt(soft);
  if (j.contains("staple")) {
    check_keys(j["staple"], {"max_iters", "tol"}, "staple");
    read(j["staple"], "max_iters", c.staple.max_iters, "staple");
    read(j["staple"], "tol", c.staple.tol, "staple");
  }
  read(j, "output", c.output, "config");
  read(j, "seed", c.seed, "config");
  read(j, "seeds", c.seeds, "config");
  read(j, "threads", c.threads, "config");
  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    check_keys(s, {"axis", "values", "variant"}, "sweep");
    std::string axis = labelfill::to_string(c.sweep.axis);
    read(s, "axis", axis, "sweep");
    c.sweep.axis = parse_sweep_axis(axis);
    read(s, "values", c.sweep.values, "sweep");
    read(s, "variant", c.sweep.variant, "sweep");
  }
  if (j.contains("bound")) {
    const json& b = j["bound"];
    check_keys(b, {"raters", "dissent", "p_min", "p_max", "lemma_p_r", "lemma_classes", "lemma_trials"}, "bound");
    read(b, "raters", c.bound.grid.raters, "bound");
    read(b, "dissent", c.bound.grid.dissent, "bound");
    read(b, "p_min", c.bound.grid.p_min, "bound");
    read(b, "p_max", c.bound.grid.p_max, "bound");
    read(b, "lemma_p_r", c.bound.lemma_p_r, "bound");
    read(b, "lemma_classes", c.bound.lemma_classes, "bound");
    read(b, "lemma_trials", c.bound.lemma_trials, "bound");
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) { return from_json(read_text(path)); }


fs::path dataset_dir(const ExperimentConfig& c) { return c.out_dir() / "dataset"; }
fs::path stacks_dir(const ExperimentConfig& c) { return c.out_dir() / "stacks"; }
fs::path fused_dir(const ExperimentConfig& c, FusionMethod m) { return c.out_dir() / "fused" / to_string(m); }

std::string variant_slug(const Variant& v) {
  std::string out;
  for (char ch : v.name()) {
    if (ch == '+') out += '_';
    else if (ch == '(') out += '-';
    else if (ch != ')') out += ch;
  }
  return out;
}

fs::path run_dir(const ExperimentConfig& c, const Variant& v, std::uint64_t seed) {
  return c.out_dir() / "runs" / variant_slug(v) / seed_name(seed);
}

fs::path eval_dir(const ExperimentConfig& c, const Variant& v, std::uint64_t seed) {
  return c.out_dir() / "eval" / variant_slug(v) / seed_name(seed);
}

void save_stacks(const fs::path& path, const std::vector<AnnotationStack>& stacks) {
  require(!stacks.empty(), ErrorKind::Usage, "no stacks to save");
  const std::size_t r = stacks[0].raters(), h = stacks[0].height(), w = stacks[0].width();
  ByteTensor t(Shape{stacks.size(), r, h, w});
  auto out = t.data();
  std::size_t pos = 0;
  for (const auto& s : stacks) {
    require(s.raters() == r && s.height() == h && s.width() == w, ErrorKind::Dimension, "stacks differ in shape");
    for (std::size_t k = 0; k < r; ++k) {
      const auto d = s[k].data();
      std::copy(d.begin(), d.end(), out.begin() + static_cast<std::ptrdiff_t>(pos));
      pos += d.size();
    }
  }
  save_tensor(path, t);
}

std::vector<AnnotationStack> load_stacks(const fs::path& path) {
  const ByteTensor t = load_u8(path);
  require(t.shape().size() == 4, ErrorKind::Data, path.string() + ": stacks must be [N,R,H,W]");
  const std::size_t n = t.shape()[0], r = t.shape()[1], h = t.shape()[2], w = t.shape()[3];
  std::vector<AnnotationStack> out;
  out.reserve(n);
  const auto d = t.data();
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<LabelMap> maps;
    for (std::size_t q = 0; q < r; ++q) {
      const auto begin = d.begin() + static_cast<std::ptrdiff_t>((k * r + q) * h * w);
      maps.emplace_back(h, w, std::vector<std::uint8_t>(begin, begin + static_cast<std::ptrdiff_t>(h * w)));
    }
    out.emplace_back(std::move(maps));
  }
  return out;
}


std::string cmd_ingest(const ExperimentConfig& c, const LogSink& log) {
  c.validate();
  apply_threads(c);
  require(!c.dataset.train_images.empty(), ErrorKind::Usage, "dataset.train_images is not set");
  IngestOptions o;
  o.train_images = c.dataset.train_images;
  if (!c.dataset.test_images.empty()) o.test_images = c.dataset.test_images;
  o.train_limit = c.dataset.train_limit;
  o.test_limit = c.dataset.test_limit;
  o.fractions = c.dataset.fractions;
  o.seed = c.seed;
  const Dataset d = ingest_mnist(o);
  save_dataset(dataset_dir(c), d);
  json s = {{"command", "ingest"},
            {"images", d.size()},
            {"train", d.indices(Split::Train).size()},
            {"val", d.indices(Split::Val).size()},
            {"test", d.indices(Split::Test).size()},
            {"height", d.gt_labels.empty() ? 0 : d.gt_labels[0].height()},
            {"width", d.gt_labels.empty() ? 0 : d.gt_labels[0].width()},
            {"path", dataset_dir(c).string()}};
  say(log, "ingested " + std::to_string(d.size()) + " images into " + dataset_dir(c).string());
  return s.dump(2) + "\n";
}

std::string cmd_simulate(const ExperimentConfig& c, const LogSink& log) {
  c.validate();
  apply_threads(c);
  require_dir(dataset_dir(c), "ingest");
  const Dataset d = load_dataset(dataset_dir(c));
  const auto profiles = c.rater_profiles();
  const auto stacks = simulate_all(d, profiles);
  const fs::path dir = stacks_dir(c);
  fs::create_directories(dir);
  save_stacks(dir / "stacks.lft", stacks);
  const NoiseStats all = noise_stats(d, stacks);
  std::vector<AnnotationStack> train_stacks;
  Dataset train_only;
  for (std::size_t k : d.indices(Split::Train)) {
    train_stacks.push_back(stacks[k]);
    train_only.gt_labels.push_back(d.gt_labels[k]);
  }
  const NoiseStats train = noise_stats(train_only, train_stacks);
  json m = {{"command", "simulate"},
            {"images", stacks.size()},
            {"raters", profiles.size()},
            {"profiles", profiles_json(profiles)},
            {"average_dsc", all.average},
            {"per_rater_dsc", all.per_rater},
            {"average_dsc_train", train.average},
            {"path", (dir / "stacks.lft").string()}};
  write_json(dir / "manifest.json", m);
  say(log, "simulated " + std::to_string(profiles.size()) + " raters, average DSC " + format_double(all.average));
  return m.dump(2) + "\n";
}

std::string cmd_fuse(const ExperimentConfig& c, FusionMethod method, const LogSink& log) {
  c.validate();
  apply_threads(c);
  const Workspace w = load_workspace(c);
  const std::size_t n = w.stacks.size(), r = w.stacks[0].raters(), h = w.stacks[0].height(),
                    wd = w.stacks[0].width();
  const std::size_t beta = c.train.beta == 0 ? default_beta(r) : c.train.beta;
  ByteTensor labels(Shape{n, h, wd});
  ByteTensor masks(Shape{n, h, wd});
  Tensor probs(Shape{n, 2, h, wd});
  double label_dsc = 0.0, mask_frac = 0.0, posterior_gap = 0.0;
  std::size_t converged = 0, degenerate = 0, iterations = 0;
  for (std::size_t k = 0; k < n; ++k) {
    LabelMap fused;
    const AnnotationStack& s = w.stacks[k];
    switch (method) {
      case FusionMethod::Mv: fused = majority_vote(vote_counts(s, 2)); break;
      case FusionMethod::Qmv: {
        const QmvTargets q = qmv_targets(s, 2, beta);
        fused = q.labels;
        for (std::size_t p = 0; p < h * wd; ++p) masks.data()[k * h * wd + p] = q.mask[p] ? 1 : 0;
        mask_frac += static_cast<double>(q.mask.count()) / static_cast<double>(h * wd);
        break;
      }
      case FusionMethod::Mean:
      case FusionMethod::Staple: {
        ProbabilityMap pm;
        if (method == FusionMethod::Mean) {
          pm = mean_fusion(s, 2);
        } else {
          StapleResult st = staple(s, c.staple);
          converged += st.converged ? 1 : 0;
          degenerate += st.degenerate ? 1 : 0;
          iterations += static_cast<std::size_t>(st.iterations);
          pm = std::move(st.posterior);
        }
        for (std::size_t p = 0; p < 2 * h * wd; ++p) probs[k * 2 * h * wd + p] = pm.tensor()[p];
        for (std::size_t p = 0; p < h * wd; ++p) {
          posterior_gap = std::max(posterior_gap, std::abs(pm.tensor()[p] + pm.tensor()[h * wd + p] - 1.0));
        }
        fused = pm.argmax();
        break;
      }
    }
    std::copy(fused.data().begin(), fused.data().end(), labels.data().begin() + static_cast<std::ptrdiff_t>(k * h * wd));
    label_dsc += dsc(fused, w.data.gt_labels[k]);
  }
  const fs::path dir = fused_dir(c, method);
  fs::create_directories(dir);
  save_tensor(dir / "labels.lft", labels);
  json s = {{"command", "fuse"},
            {"method", to_string(method)},
            {"images", n},
            {"label_dsc", label_dsc / static_cast<double>(n)},
            {"files", json::array({"labels.lft"})}};
  if (method == FusionMethod::Qmv) {
    save_tensor(dir / "masks.lft", masks);
    s["beta"] = beta;
    s["mask_fraction"] = mask_frac / static_cast<double>(n);
    s["files"].push_back("masks.lft");
  }
  if (method == FusionMethod::Mean || method == FusionMethod::Staple) {
    save_tensor(dir / "probabilities.lft", probs);
    s["files"].push_back("probabilities.lft");
    s["max_row_sum_error"] = posterior_gap;
  }
  if (method == FusionMethod::Staple) {
    s["converged"] = converged;
    s["degenerate"] = degenerate;
    s["mean_iterations"] = static_cast<double>(iterations) / static_cast<double>(n);
  }
  write_json(dir / "summary.json", s);
  say(log, std::string("fused with ") + to_string(method) + ", label DSC " + format_double(s["label_dsc"].get<double>()));
  return s.dump(2) + "\n";
}

std::string cmd_train(const ExperimentConfig& c, const Variant& v, const LogSink& log) {
  c.validate();
  v.validate();
  apply_threads(c);
  const Workspace w = load_workspace(c);
  const TrainInputs in = train_inputs(w.data, w.stacks, c.train.beta, v.target);
  json runs = json::array();
  for (std::uint64_t seed : c.run_seeds()) {
    TrainConfig t = c.train;
    t.seed = seed;
    const TrainedRun run = train_one(c, in, v, t, w.fingerprint, true, log);
    const fs::path dir = run_dir(c, v, seed);
    fs::remove_all(dir);
    const UNetConfig net = seg_config(t, 1, 2);
    json meta = {{"variant", v.name()}, {"seed", seed}, {"channels", net.channels}, {"classes", net.classes}};
    save_checkpoint(dir / "checkpoint", run.result.params, meta.dump());
    write_text_atomic(dir / "curve.csv", curve_csv(run.result.curve));
    write_text_atomic(dir / "epochs.csv", epoch_csv(run.result.epochs));
    const auto& ep = run.result.epochs;
    json m = {{"variant", v.name()},
              {"seed", seed},
              {"train", train_json(t)},
              {"flags",
               {{"tv", v.tv}, {"sls", v.sls}, {"rcls", v.rcls}, {"ce", v.ce}, {"distill_mask", v.distill_mask},
                {"target", to_string(v.target)}}},
              {"train_images", in.set.size()},
              {"iterations", run.result.iterations},
              {"teacher_iterations", run.teacher_iterations},
              {"initial_epoch_loss", ep.empty() ? 0.0 : ep.front().mean_loss},
              {"final_epoch_loss", ep.empty() ? 0.0 : ep.back().mean_loss},
              {"checkpoint", (dir / "checkpoint").string()}};
    if (!ep.empty() && ep.back().val_dsc >= 0) m["final_val_dsc"] = ep.back().val_dsc;
    write_json(dir / "manifest.json", m);
    runs.push_back(m);
  }
  return json{{"command", "train"}, {"variant", v.name()}, {"runs", runs}}.dump(2) + "\n";
}

std::string cmd_eval(const ExperimentConfig& c, const Variant& v, const fs::path& checkpoint, const LogSink& log) {
  c.validate();
  apply_threads(c);
  const Workspace w = load_workspace(c);
  std::vector<std::uint64_t> seeds = checkpoint.empty() ? c.run_seeds() : std::vector<std::uint64_t>{c.seed};
  json out = json::array();
  for (std::uint64_t seed : seeds) {
    const fs::path ck = checkpoint.empty() ? run_dir(c, v, seed) / "checkpoint" : checkpoint;
    require_dir(ck, "train");
    const ParameterSet params = load_checkpoint(ck);
    const EvalReport rep = evaluate(c, w.data, w.stacks, params, v.name(), seed);
    const fs::path dir = eval_dir(c, v, seed);
    write_report(dir, rep);
    out.push_back({{"seed", seed}, {"images", rep.records.size() / c.metrics.size()}, {"aggregate", aggregate_json(rep)}});
    say(log, "evaluated " + v.name() + " seed " + std::to_string(seed) + ": DSC " +
                 format_double(rep.aggregate().count("dsc") ? rep.aggregate().at("dsc").mean : 0.0));
  }
  return json{{"command", "eval"}, {"variant", v.name()}, {"reports", out}}.dump(2) + "\n";
}

std::string cmd_sweep(const ExperimentConfig& c, const LogSink& log) {
  c.validate();
  apply_threads(c);
  require(!c.sweep.values.empty(), ErrorKind::Usage, std::string("no values given for the ") +
                                                         to_string(c.sweep.axis) + " sweep");
  const Variant v = Variant::parse(c.sweep.variant);
  v.validate();
  require_dir(dataset_dir(c), "ingest");
  const Dataset data = load_dataset(dataset_dir(c));
  const auto base_profiles = c.rater_profiles();
  json rows = json::array();
  std::ostringstream csv;
  csv << "axis,value,seed,rater_dsc";
  for (const auto& m : c.metrics) csv << ',' << m;
  csv << '\n';
  SvgSeries series{v.name(), {}, {}};
  for (double value : c.sweep.values) {
    ExperimentConfig cv = c;
    auto profiles = base_profiles;
    switch (c.sweep.axis) {
      case SweepAxis::Beta:
        require(value >= 1 && value <= static_cast<double>(profiles.size()) && value == std::floor(value),
                ErrorKind::Usage, "beta values must be integers in [1, " + std::to_string(profiles.size()) + "]");
        cv.train.beta = static_cast<std::size_t>(value);
        break;
      case SweepAxis::Lambda: cv.train.lambda = value; break;
      case SweepAxis::Tau: cv.train.tau = value; break;
      case SweepAxis::NoiseLevel:
        require(value > 0, ErrorKind::Usage, "noise levels must be positive");
        profiles = scaled_profiles(profiles, value);
        break;
    }
    cv.validate();
    const auto stacks = simulate_all(data, profiles);
    const double rater_dsc = noise_stats(data, stacks).average;
    const TrainInputs in = train_inputs(data, stacks, cv.train.beta, v.target);
    double dsc_sum = 0.0;
    for (std::uint64_t seed : c.run_seeds()) {
      TrainConfig t = cv.train;
      t.seed = seed;
      say(log, std::string("sweep ") + to_string(c.sweep.axis) + "=" + format_double(value));
      const TrainedRun run = train_one(cv, in, v, t, 0, false, log);
      const EvalReport rep = evaluate(cv, data, stacks, run.result.params, v.name(), seed);
      const auto agg = rep.aggregate();
      json row = {{"axis", to_string(c.sweep.axis)}, {"value", value}, {"seed", seed}, {"rater_dsc", rater_dsc}};
      csv << to_string(c.sweep.axis) << ',' << format_double(value) << ',' << seed << ',' << format_double(rater_dsc);
      for (const auto& m : c.metrics) {
        row[m] = agg.at(m).mean;
        csv << ',' << format_double(agg.at(m).mean);
      }
      csv << '\n';
      if (agg.count("dsc")) dsc_sum += agg.at("dsc").mean;
      rows.push_back(row);
    }
    series.x.push_back(value);
    series.y.push_back(dsc_sum / static_cast<double>(c.run_seeds().size()));
  }
  const fs::path dir = c.out_dir() / "sweep" / to_string(c.sweep.axis);
  fs::create_directories(dir);
  write_text_atomic(dir / "sweep.csv", csv.str());
  const json s = {{"command", "sweep"}, {"axis", to_string(c.sweep.axis)}, {"variant", v.name()}, {"rows", rows}};
  write_json(dir / "summary.json", s);
  if (std::find(c.metrics.begin(), c.metrics.end(), "dsc") != c.metrics.end()) {
    const SvgSeries one[] = {series};
    write_text_atomic(dir / "sweep.svg", svg_line_chart(std::string("Test DSC versus ") + to_string(c.sweep.axis),
                                                        to_string(c.sweep.axis), "mean test DSC", one));
  }
  return s.dump(2) + "\n";
}

std::string cmd_bound(const ExperimentConfig& c, const LogSink& log) {
  c.validate();
  const auto rows = bound_sweep(c.bound.grid);
  const fs::path dir = c.out_dir() / "bound";
  fs::create_directories(dir);
  write_text_atomic(dir / "bound.csv", bound_csv(rows));
  json checkpoints = json::array();
  for (std::size_t r : {7, 8, 9}) {
    checkpoints.push_back({{"R", r},
                           {"C", 1},
                           {"p_min", 0.75},
                           {"p_max", 0.95},
                           {"lower_bound", pgt_lower_bound(BoundParams::uniform(r, 1, 0.75, 0.95))}});
  }
  json lemma = json::array();
  for (std::size_t l : c.bound.lemma_classes) {
    const LemmaReport rep = lemma_bound_check(c.bound.lemma_p_r, l, c.bound.lemma_trials, mix_seed(c.seed, l));
    lemma.push_back({{"classes", l},
                     {"p_r", c.bound.lemma_p_r},
                     {"trials", rep.trials},
                     {"checks", rep.checks},
                     {"violations", rep.violations},
                     {"max_excess", rep.max_excess},
                     {"max_route_gap", rep.max_route_gap}});
  }
  std::map<std::string, SvgSeries> series;
  for (const auto& row : rows) {
    const std::string name = "C=" + std::to_string(row.dissent) + " p_min=" + format_double(row.p_min) +
                             " p_max=" + format_double(row.p_max);
    auto& s = series[name];
    s.name = name;
    s.x.push_back(static_cast<double>(row.raters));
    s.y.push_back(row.lower_bound);
  }
  std::vector<SvgSeries> list;
  for (auto& [_, s] : series) list.push_back(std::move(s));
  write_text_atomic(dir / "bound.svg", svg_line_chart("Lower bound on the qualified-majority posterior",
                                                      "raters R", "lower bound", list));
  const json s = {{"command", "bound"}, {"rows", rows.size()}, {"checkpoints", checkpoints}, {"lemma", lemma}};
  write_json(dir / "summary.json", s);
  say(log, "bound table with " + std::to_string(rows.size()) + " rows written to " + dir.string());
  return s.dump(2) + "\n";
}

std::string cmd_report(const ExperimentConfig& c, const LogSink& log) {
  c.validate();
  const fs::path root = c.out_dir() / "eval";
  require_dir(root, "eval");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().filename() == "report.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorKind::Usage, "no evaluation reports under " + root.string() + " (run 'eval' first)");

  struct Acc {
    std::vector<double> seed_means;
    std::vector<double> pooled;
  };
  std::map<std::string, std::map<std::string, Acc>> acc;
  std::vector<std::string> order;
  for (const auto& f : files) {
    const EvalReport rep = EvalReport::from_json(read_text(f));
    if (std::find(order.begin(), order.end(), rep.method) == order.end()) order.push_back(rep.method);
    for (const auto& [metric, s] : rep.aggregate()) {
      auto& a = acc[rep.method][metric];
      a.seed_means.push_back(s.mean);
      const auto vals = rep.values(metric);
      a.pooled.insert(a.pooled.end(), vals.begin(), vals.end());
    }
  }
  std::ostringstream summary, box;
  summary << "method,metric,mean,std,seeds,images\n";
  box << "method,metric,min,q1,median,q3,max\n";
  json methods = json::object();
  std::vector<std::string> labels;
  std::vector<double> means, stds;
  std::vector<std::array<double, 5>> boxes;
  for (const auto& method : order) {
    for (const auto& [metric, a] : acc[method]) {
      const MetricSummary s = summarize(a.seed_means);
      const auto q = five_number_summary(a.pooled);
      summary << method << ',' << metric << ',' << format_double(s.mean) << ',' << format_double(s.std) << ','
              << a.seed_means.size() << ',' << a.pooled.size() << '\n';
      box << method << ',' << metric;
      for (double v : q) box << ',' << format_double(v);
      box << '\n';
      methods[method][metric] = {{"mean", s.mean}, {"std", s.std}, {"seeds", a.seed_means.size()},
                                 {"per_seed", a.seed_means}, {"quartiles", q}};
      if (metric == "dsc") {
        labels.push_back(method);
        means.push_back(s.mean);
        stds.push_back(s.std);
        boxes.push_back(q);
      }
    }
  }
  const fs::path dir = c.out_dir() / "report";
  fs::create_directories(dir);
  write_text_atomic(dir / "summary.csv", summary.str());
  write_text_atomic(dir / "box.csv", box.str());
  const json s = {{"command", "report"}, {"reports", files.size()}, {"methods", methods}};
  write_json(dir / "summary.json", s);
  if (!labels.empty()) {
    write_text_atomic(dir / "dsc.svg", svg_bar_chart("Test DSC (mean and std over seeds)", "DSC", labels, means, stds));
    write_text_atomic(dir / "dsc_box.svg", svg_box_chart("Per-image test DSC", "DSC", labels, boxes));
  }
  say(log, "report over " + std::to_string(files.size()) + " evaluation runs written to " + dir.string());
  return s.dump(2) + "\n";
}

}  // namespace labelfill
