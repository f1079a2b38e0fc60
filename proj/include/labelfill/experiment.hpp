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


#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "labelfill/bounds.hpp"
#include "labelfill/fusion.hpp"
#include "labelfill/ingest.hpp"
#include "labelfill/metrics.hpp"
#include "labelfill/rater_sim.hpp"
#include "labelfill/training.hpp"

namespace labelfill {

struct DatasetConfig {
  std::string train_images;
  std::string test_images;  // empty when no separate test file is used
  std::size_t train_limit = 1000;
  std::size_t test_limit = 200;
  SplitFractions fractions;

  bool operator==(const DatasetConfig& o) const;
};

enum class SweepAxis { Beta, Lambda, Tau, NoiseLevel };

const char* to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(const std::string& name);

struct SweepConfig {
  SweepAxis axis = SweepAxis::Beta;
  std::vector<double> values;
  std::string variant = "qmv";

  bool operator==(const SweepConfig&) const = default;
};

struct BoundConfig {
  BoundGrid grid{{3, 4, 5, 6, 7, 8, 9, 10, 11, 12}, {1, 2}, {0.6, 0.75, 0.9}, {0.95}};
  double lemma_p_r = 0.8;
  std::vector<std::size_t> lemma_classes{2, 3, 5};
  std::size_t lemma_trials = 10000;

  bool operator==(const BoundConfig& o) const;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::vector<RaterProfile> raters;  // empty selects default_profiles(seed)
  TrainConfig train;
  std::string variant = "lfnet";
  FusionMethod fusion = FusionMethod::Qmv;
  std::vector<std::string> metrics{"dsc", "iou", "bahd", "soft_dsc", "soft_iou"};
  std::vector<double> thresholds{kDefaultThresholds, kDefaultThresholds + 5};
  SoftGt soft_gt = SoftGt::RaterMean;
  StapleOptions staple;
  std::string output = "labelfill-out";
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;  // training repetitions; empty selects {seed}
  std::size_t threads = 1;
  SweepConfig sweep;
  BoundConfig bound;

  std::vector<RaterProfile> rater_profiles() const;
  std::vector<std::uint64_t> run_seeds() const;
  std::filesystem::path out_dir() const { return output; }
  void validate() const;

  std::string to_json() const;
  // Unknown keys are configuration errors; absent keys keep their defaults.
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);

  bool operator==(const ExperimentConfig& o) const;
};

inline const std::vector<std::string>& known_metrics() {
  static const std::vector<std::string> names{"dsc", "iou", "bahd", "soft_dsc", "soft_iou"};
  return names;
}

// Progress lines; never part of any artifact.
using LogSink = std::function<void(std::string_view)>;

// Each command writes its artifacts under config.output and returns a JSON
// summary of what it produced.
std::string cmd_ingest(const ExperimentConfig& config, const LogSink& log = {});
std::string cmd_simulate(const ExperimentConfig& config, const LogSink& log = {});
std::string cmd_fuse(const ExperimentConfig& config, FusionMethod method, const LogSink& log = {});
std::string cmd_train(const ExperimentConfig& config, const Variant& variant, const LogSink& log = {});
// An empty checkpoint selects the run directory written by cmd_train.
std::string cmd_eval(const ExperimentConfig& config, const Variant& variant,
                     const std::filesystem::path& checkpoint = {}, const LogSink& log = {});
std::string cmd_sweep(const ExperimentConfig& config, const LogSink& log = {});
std::string cmd_bound(const ExperimentConfig& config, const LogSink& log = {});
std::string cmd_report(const ExperimentConfig& config, const LogSink& log = {});

// Artifact locations.
std::filesystem::path dataset_dir(const ExperimentConfig& config);
std::filesystem::path stacks_dir(const ExperimentConfig& config);
std::filesystem::path fused_dir(const ExperimentConfig& config, FusionMethod method);
std::filesystem::path run_dir(const ExperimentConfig& config, const Variant& variant, std::uint64_t seed);
std::filesystem::path eval_dir(const ExperimentConfig& config, const Variant& variant, std::uint64_t seed);
std::string variant_slug(const Variant& variant);

void save_stacks(const std::filesystem::path& path, const std::vector<AnnotationStack>& stacks);
std::vector<AnnotationStack> load_stacks(const std::filesystem::path& path);

}  // namespace labelfill
