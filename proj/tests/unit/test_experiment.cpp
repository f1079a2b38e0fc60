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

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "labelfill/experiment.hpp"
#include "support.hpp"

using namespace labelfill;
using labelfill::testing::kind_of;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("labelfill-test-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c;
  const fs::path data = fs::path(LABELFILL_SOURCE_DIR) / "data" / "mnist-subset";
  c.dataset.train_images = (data / "train-images-idx3-ubyte").string();
  c.dataset.test_images = (data / "t10k-images-idx3-ubyte").string();
  c.dataset.train_limit = 40;
  c.dataset.test_limit = 10;
  c.train.channels = {4, 8};
  c.train.epochs_sll = 1;
  c.train.epochs_seg = 1;
  c.train.rcn_active_epochs = 1;
  c.output = out.string();
  return c;
}

ExperimentConfig prepared(const fs::path& out) {
  const ExperimentConfig c = tiny_config(out);
  cmd_ingest(c);
  cmd_simulate(c);
  return c;
}

}  // namespace

TEST_CASE("config json round trip") {
  ExperimentConfig c = tiny_config("/tmp/x");
  c.seeds = {3, 4};
  c.raters = {{RaterKind::Good, 0, 9}, {RaterKind::Over, 2, 10}, {RaterKind::Blank, 0, 11}};
  c.sweep.axis = SweepAxis::NoiseLevel;
  c.sweep.values = {0.5, 1.0};
  c.fusion = FusionMethod::Staple;
  const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
  CHECK(back == c);
  CHECK(back.to_json() == c.to_json());
  CHECK(ExperimentConfig::from_json("{}") == ExperimentConfig{});
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK(kind_of([] { ExperimentConfig::from_json(R"({"sed": 1})"); }) == ErrorKind::Configuration);
  CHECK(kind_of([] { ExperimentConfig::from_json(R"({"train": {"learning_rate": 1}})"); }) ==
        ErrorKind::Configuration);
  CHECK(kind_of([] { ExperimentConfig::from_json("{"); }) == ErrorKind::Parse);
  ExperimentConfig c;
  c.metrics = {"accuracy"};
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::Configuration);
  CHECK(kind_of([] { parse_sweep_axis("depth"); }) == ErrorKind::Usage);
  CHECK(std::string(to_string(parse_sweep_axis("noise_level"))) == "noise_level");
}

TEST_CASE("variant slugs and result paths") {
  CHECK(variant_slug(Variant::parse("lfnet")) == "S_TV_SLS_RCLS");
  CHECK(variant_slug(Variant::parse("S")) == "S");
  ExperimentConfig c;
  c.output = "out";
  CHECK(run_dir(c, Variant::parse("qmv"), 2) == fs::path("out/runs/S_TV/seed-2"));
  CHECK(eval_dir(c, Variant::parse("mv"), 1) == fs::path("out/eval/S/seed-1"));
}

TEST_CASE("commands fail cleanly without their inputs") {
  TempDir t("missing");
  const ExperimentConfig c = tiny_config(t.path);
  CHECK(kind_of([&] { cmd_simulate(c); }) == ErrorKind::Io);
  CHECK(kind_of([&] { cmd_fuse(c, FusionMethod::Mv); }) == ErrorKind::Io);
  CHECK(kind_of([&] { cmd_report(c); }) == ErrorKind::Io);
  ExperimentConfig bad = c;
  bad.dataset.train_images = (t.path / "absent").string();
  CHECK(kind_of([&] { cmd_ingest(bad); }) == ErrorKind::Io);
}

TEST_CASE("ingest, simulate and fuse write their artifacts") {
  TempDir t("pipeline");
  const ExperimentConfig c = tiny_config(t.path);
  const json ing = json::parse(cmd_ingest(c));
  CHECK(ing["images"] == 50);
  CHECK(ing["test"] == 10);
  CHECK(ing["train"].get<int>() + ing["val"].get<int>() == 40);
  const json sim = json::parse(cmd_simulate(c));
  const double avg = sim["average_dsc"];
  CHECK(avg > 0.0);
  CHECK(avg < 1.0);
  CHECK(sim["per_rater_dsc"][0] == doctest::Approx(1.0));
  CHECK(sim["per_rater_dsc"][4] == doctest::Approx(0.0));
  const auto stacks = load_stacks(stacks_dir(c) / "stacks.lft");
  REQUIRE(stacks.size() == 50);
  CHECK(stacks[0].raters() == 5);

  const json q = json::parse(cmd_fuse(c, FusionMethod::Qmv));
  CHECK(fs::exists(fused_dir(c, FusionMethod::Qmv) / "masks.lft"));
  CHECK(q["mask_fraction"].get<double>() > 0.0);
  CHECK(q["mask_fraction"].get<double>() < 1.0);
  const json s = json::parse(cmd_fuse(c, FusionMethod::Staple));
  CHECK(s["max_row_sum_error"].get<double>() < 1e-12);
  CHECK(fs::exists(fused_dir(c, FusionMethod::Staple) / "probabilities.lft"));
  const json m = json::parse(cmd_fuse(c, FusionMethod::Mv));
  CHECK(m["label_dsc"] == q["label_dsc"]);
}

TEST_CASE("all good raters give unit average dsc") {
  TempDir t("good");
  ExperimentConfig c = tiny_config(t.path);
  c.raters = {{RaterKind::Good, 0, 1}, {RaterKind::Good, 0, 2}, {RaterKind::Good, 0, 3}};
  cmd_ingest(c);
  const json sim = json::parse(cmd_simulate(c));
  CHECK(sim["average_dsc"] == doctest::Approx(1.0));
  const json q = json::parse(cmd_fuse(c, FusionMethod::Qmv));
  CHECK(q["mask_fraction"] == doctest::Approx(1.0));
}

TEST_CASE("train then eval emits one row per test image and metric") {
  TempDir t("train");
  const ExperimentConfig c = prepared(t.path);
  const Variant v = Variant::parse("qmv");
  const json tr = json::parse(cmd_train(c, v));
  REQUIRE(tr["runs"].size() == 1);
  CHECK(fs::exists(run_dir(c, v, 1) / "checkpoint"));
  CHECK(fs::exists(run_dir(c, v, 1) / "curve.csv"));
  cmd_eval(c, v);
  const std::string csv = slurp(eval_dir(c, v, 1) / "report.csv");
  const auto lines = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
  CHECK(lines == 1 + 10 * c.metrics.size());
  CHECK(kind_of([&] { cmd_eval(c, Variant::parse("S")); }) == ErrorKind::Io);
  const json rep = json::parse(cmd_report(c));
  CHECK(rep["methods"].contains("S+TV"));
  CHECK(fs::exists(t.path / "report" / "summary.csv"));
}

TEST_CASE("damaged checkpoints are rejected") {
  TempDir t("integrity");
  const ExperimentConfig c = prepared(t.path);
  const Variant v = Variant::parse("S");
  cmd_train(c, v);
  const fs::path index = run_dir(c, v, 1) / "checkpoint" / "index.json";
  json j = json::parse(slurp(index));
  auto& entries = j["entries"];
  entries.erase(std::remove_if(entries.begin(), entries.end(), [](const json& e) { return e["key"] == "out.weight"; }),
                entries.end());
  std::ofstream(index) << j.dump();
  CHECK(kind_of([&] { cmd_eval(c, v); }) == ErrorKind::Integrity);
  fs::remove(run_dir(c, v, 1) / "checkpoint" / "out.bias.lft");
  CHECK(kind_of([&] { cmd_eval(c, v); }) == ErrorKind::Io);
}

TEST_CASE("sweeps") {
  TempDir t("sweep");
  ExperimentConfig c = prepared(t.path);
  c.sweep.axis = SweepAxis::Beta;
  c.sweep.values = {1, 2, 3, 4, 5};
  c.sweep.variant = "qmv";
  const json s = json::parse(cmd_sweep(c));
  CHECK(s["rows"].size() == 5);
  CHECK(fs::exists(t.path / "sweep" / "beta" / "sweep.svg"));

  c.sweep.values = {6};
  CHECK(kind_of([&] { cmd_sweep(c); }) == ErrorKind::Usage);
  c.sweep.values = {};
  CHECK(kind_of([&] { cmd_sweep(c); }) == ErrorKind::Usage);

  c.sweep.axis = SweepAxis::Lambda;
  c.sweep.values = {c.train.lambda};
  const json one = json::parse(cmd_sweep(c));
  cmd_train(c, Variant::parse("qmv"));
  const json ev = json::parse(cmd_eval(c, Variant::parse("qmv")));
  CHECK(one["rows"][0]["dsc"].get<double>() == ev["reports"][0]["aggregate"]["dsc"]["mean"].get<double>());
}

TEST_CASE("bound command reports the checkpoints") {
  TempDir t("bound");
  ExperimentConfig c = tiny_config(t.path);
  c.bound.lemma_trials = 200;
  const json b = json::parse(cmd_bound(c));
  REQUIRE(b["checkpoints"].size() == 3);
  CHECK(b["checkpoints"][1]["R"] == 8);
  CHECK(b["checkpoints"][1]["lower_bound"].get<double>() >= 0.991);
  for (const auto& l : b["lemma"]) CHECK(l["max_excess"].get<double>() <= 1e-12);
  CHECK(fs::exists(t.path / "bound" / "bound.csv"));
}

TEST_CASE("commands are deterministic") {
  TempDir t("det");
  const std::vector<std::string> files{"stacks/manifest.json", "fused/staple/summary.json",
                                       "runs/S_TV_SLS_RCLS/seed-1/curve.csv", "runs/S_TV_SLS_RCLS/seed-1/manifest.json",
                                       "eval/S_TV_SLS_RCLS/seed-1/report.csv", "eval/S_TV_SLS_RCLS/seed-1/report.json"};
  std::vector<std::string> first;
  for (int pass = 0; pass < 2; ++pass) {
    fs::remove_all(t.path);
    const ExperimentConfig c = prepared(t.path);
    cmd_fuse(c, FusionMethod::Staple);
    cmd_train(c, Variant::parse("lfnet"));
    cmd_eval(c, Variant::parse("lfnet"));
    for (std::size_t k = 0; k < files.size(); ++k) {
      const std::string bytes = slurp(t.path / files[k]);
      CHECK_MESSAGE(!bytes.empty(), files[k]);
      if (pass == 0) {
        first.push_back(bytes);
      } else {
        CHECK_MESSAGE(bytes == first[k], files[k]);
      }
    }
  }
}
