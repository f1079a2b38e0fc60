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


#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "labelfill/labelfill.h"

namespace {

using nlohmann::json;

void print_log(const char* line, void*) { std::cerr << "labelfill: " << line << '\n'; }

int report_failure(lf_status st) {
  std::cerr << "labelfill: error (" << lf_last_error_kind() << "): " << lf_last_error() << '\n';
  return static_cast<int>(st);
}

template <typename T>
std::optional<std::vector<T>> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v;
    if (!(is >> v) || !(is >> std::ws).eof()) return std::nullopt;
    out.push_back(v);
  }
  if (out.empty()) return std::nullopt;
  return out;
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
std::vector<T> list_or_throw(const std::string& text, const char* name) {
  auto v = parse_list<T>(text);
  if (!v) throw UsageError(std::string("--") + name + " expects a comma-separated list, got '" + text + "'");
  return *v;
}

json parse_profile(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.empty() || parts.size() > 3) throw UsageError("--rater expects kind[:strength[:seed]], got '" + spec + "'");
  json p = {{"kind", parts[0]}, {"strength", 0}, {"seed", 0}};
  try {
    if (parts.size() > 1) p["strength"] = std::stoi(parts[1]);
    if (parts.size() > 2) p["seed"] = std::stoull(parts[2]);
  } catch (const std::exception&) {
    throw UsageError("--rater expects kind[:strength[:seed]], got '" + spec + "'");
  }
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label fusion and label-filling segmentation on multi-rater annotations"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool quiet = false, print_config = false;
  app.add_option("--config", config_path, "JSON experiment configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Global seed");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--threads", threads, "BLAS threads")->check(CLI::PositiveNumber);
  app.add_flag("-q,--quiet", quiet, "Suppress progress lines on stderr");
  app.add_flag("--print-config", print_config, "Print the effective configuration to stderr before running");

  json patch = json::object();
  std::string seeds_text;

  auto* ingest = app.add_subcommand("ingest", "Parse MNIST IDX files into a dataset with splits");
  std::string train_images, test_images, fractions_text;
  std::optional<std::size_t> train_limit, test_limit;
  ingest->add_option("--train-images", train_images, "IDX image file for the train pool");
  ingest->add_option("--test-images", test_images, "IDX image file appended as the test split");
  ingest->add_option("--train-limit", train_limit, "Images taken from the train pool");
  ingest->add_option("--test-limit", test_limit, "Images taken from the test file");
  ingest->add_option("--fractions", fractions_text, "train,val,test fractions of the train pool");

  auto* simulate = app.add_subcommand("simulate", "Simulate rater annotation stacks");
  std::vector<std::string> rater_specs;
  simulate->add_option("--rater", rater_specs, "Rater profile kind[:strength[:seed]] (repeatable)");

  auto* fuse = app.add_subcommand("fuse", "Fuse annotation stacks into targets");
  std::string method = "qmv";
  std::optional<std::size_t> fuse_beta;
  fuse->add_option("--method", method, "mv, qmv, mean or staple");
  fuse->add_option("--beta", fuse_beta, "Agreement threshold for qmv (default R-1)");

  auto add_variant = [&](CLI::App* cmd, std::string& variant, bool& no_tv, bool& no_ce) {
    cmd->add_option("--variant", variant, "mv, qmv, lfnet, mean, staple or S[+TV][+SLS][+RCLS]");
    cmd->add_flag("--no-tv-distill", no_tv, "Distill without the trust mask");
    cmd->add_flag("--no-ce", no_ce, "Drop the cross-entropy term");
    cmd->add_option("--seeds", seeds_text, "Comma-separated training seeds");
  };

  auto* train = app.add_subcommand("train", "Train a segmentation variant");
  std::string train_variant = "lfnet";
  bool train_no_tv = false, train_no_ce = false;
  add_variant(train, train_variant, train_no_tv, train_no_ce);
  std::optional<double> lr, tau, lambda;
  std::optional<std::size_t> batch, beta, epochs_sll, epochs_seg, rcn_epochs;
  std::string backbone;
  train->add_option("--lr", lr, "Adam learning rate");
  train->add_option("--batch", batch, "Batch size");
  train->add_option("--tau", tau, "Distillation temperature");
  train->add_option("--lambda", lambda, "Rater characteristics loss weight");
  train->add_option("--beta", beta, "Trust-mask agreement threshold (0 selects R-1)");
  train->add_option("--epochs-sll", epochs_sll, "Soft-label network epochs");
  train->add_option("--epochs-seg", epochs_seg, "Segmentation network epochs");
  train->add_option("--rcn-epochs", rcn_epochs, "Epochs with the rater heads active");
  train->add_option("--rcn-backbone", backbone, "separate or shared");

  auto* eval = app.add_subcommand("eval", "Evaluate trained checkpoints on the test split");
  std::string eval_variant = "lfnet", checkpoint;
  bool eval_no_tv = false, eval_no_ce = false;
  add_variant(eval, eval_variant, eval_no_tv, eval_no_ce);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory (default: the train output)");

  auto* sweep = app.add_subcommand("sweep", "Train and evaluate across values of one setting");
  std::string axis, values_text, sweep_variant;
  sweep->add_option("--axis", axis, "beta, lambda, tau or noise_level");
  sweep->add_option("--values", values_text, "Comma-separated values");
  sweep->add_option("--variant", sweep_variant, "Variant to train at each value");
  sweep->add_option("--seeds", seeds_text, "Comma-separated training seeds");

  auto* bound = app.add_subcommand("bound", "Tabulate posterior bounds for qualified majority voting");
  std::string b_raters, b_dissent, b_pmin, b_pmax;
  bound->add_option("--raters", b_raters, "Comma-separated rater counts");
  bound->add_option("--dissent", b_dissent, "Comma-separated dissent counts");
  bound->add_option("--p-min", b_pmin, "Comma-separated p_min values");
  bound->add_option("--p-max", b_pmax, "Comma-separated p_max values");

  auto* report = app.add_subcommand("report", "Aggregate evaluation reports across variants and seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : LF_ERR_USAGE;
  }

  try {
    if (ingest->parsed()) {
      json d = json::object();
      if (!train_images.empty()) d["train_images"] = train_images;
      if (!test_images.empty()) d["test_images"] = test_images;
      if (train_limit) d["train_limit"] = *train_limit;
      if (test_limit) d["test_limit"] = *test_limit;
      if (!fractions_text.empty()) {
        const auto f = list_or_throw<double>(fractions_text, "fractions");
        if (f.size() != 3) throw UsageError("--fractions expects exactly three values");
        d["fractions"] = {{"train", f[0]}, {"val", f[1]}, {"test", f[2]}};
      }
      patch["dataset"] = d;
    }
    if (simulate->parsed() && !rater_specs.empty()) {
      json r = json::array();
      for (const auto& s : rater_specs) r.push_back(parse_profile(s));
      patch["raters"] = r;
    }
    if (fuse->parsed() && fuse_beta) patch["train"]["beta"] = *fuse_beta;
    if (train->parsed()) {
      json t = json::object();
      if (lr) t["lr"] = *lr;
      if (tau) t["tau"] = *tau;
      if (lambda) t["lambda"] = *lambda;
      if (batch) t["batch"] = *batch;
      if (beta) t["beta"] = *beta;
      if (epochs_sll) t["epochs_sll"] = *epochs_sll;
      if (epochs_seg) t["epochs_seg"] = *epochs_seg;
      if (rcn_epochs) t["rcn_active_epochs"] = *rcn_epochs;
      if (!backbone.empty()) t["rcn_backbone"] = backbone;
      if (!t.empty()) patch["train"] = t;
    }
    if (sweep->parsed()) {
      json s = json::object();
      if (!axis.empty()) s["axis"] = axis;
      if (!values_text.empty()) s["values"] = list_or_throw<double>(values_text, "values");
      if (!sweep_variant.empty()) s["variant"] = sweep_variant;
      patch["sweep"] = s;
    }
    if (bound->parsed()) {
      json b = json::object();
      if (!b_raters.empty()) b["raters"] = list_or_throw<std::size_t>(b_raters, "raters");
      if (!b_dissent.empty()) b["dissent"] = list_or_throw<std::size_t>(b_dissent, "dissent");
      if (!b_pmin.empty()) b["p_min"] = list_or_throw<double>(b_pmin, "p-min");
      if (!b_pmax.empty()) b["p_max"] = list_or_throw<double>(b_pmax, "p-max");
      patch["bound"] = b;
    }
    if (!seeds_text.empty()) patch["seeds"] = list_or_throw<std::uint64_t>(seeds_text, "seeds");
  } catch (const UsageError& e) {
    std::cerr << "labelfill: error (usage): " << e.what() << '\n';
    return LF_ERR_USAGE;
  }

  lf_context* ctx = nullptr;
  lf_status st = config_path.empty() ? lf_context_new(&ctx) : lf_context_from_file(config_path.c_str(), &ctx);
  if (st != LF_OK) return report_failure(st);
  struct Guard {
    lf_context* c;
    ~Guard() { lf_context_free(c); }
  } guard{ctx};

  if (!quiet) lf_context_set_logger(ctx, print_log, nullptr);
  if (!patch.empty() && (st = lf_context_patch(ctx, patch.dump().c_str())) != LF_OK) return report_failure(st);
  if (seed && (st = lf_context_set_seed(ctx, *seed)) != LF_OK) return report_failure(st);
  if (!out_dir.empty() && (st = lf_context_set_output(ctx, out_dir.c_str())) != LF_OK) return report_failure(st);
  if (threads && (st = lf_context_set_threads(ctx, *threads)) != LF_OK) return report_failure(st);

  if (print_config) {
    char* text = nullptr;
    if ((st = lf_context_config(ctx, &text)) != LF_OK) return report_failure(st);
    std::cerr << text;
    lf_free_string(text);
  }

  char* summary = nullptr;
  if (ingest->parsed()) st = lf_ingest(ctx, &summary);
  else if (simulate->parsed()) st = lf_simulate(ctx, &summary);
  else if (fuse->parsed()) st = lf_fuse(ctx, method.c_str(), &summary);
  else if (train->parsed())
    st = lf_train(ctx, train_variant.c_str(),
                  (train_no_tv ? LF_VARIANT_NO_TV_DISTILL : 0) | (train_no_ce ? LF_VARIANT_NO_CE : 0), &summary);
  else if (eval->parsed())
    st = lf_eval(ctx, eval_variant.c_str(),
                 (eval_no_tv ? LF_VARIANT_NO_TV_DISTILL : 0) | (eval_no_ce ? LF_VARIANT_NO_CE : 0),
                 checkpoint.c_str(), &summary);
  else if (sweep->parsed()) st = lf_sweep(ctx, &summary);
  else if (bound->parsed()) st = lf_bound(ctx, &summary);
  else if (report->parsed()) st = lf_report(ctx, &summary);
  if (st != LF_OK) return report_failure(st);
  if (summary) {
    std::cout << summary;
    lf_free_string(summary);
  }
  return 0;
}
