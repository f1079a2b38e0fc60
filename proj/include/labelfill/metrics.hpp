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

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "labelfill/labels.hpp"

namespace labelfill {

inline constexpr double kDefaultThresholds[] = {0.1, 0.3, 0.5, 0.7, 0.9};

double dsc(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls = 1);
double iou(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls = 1);

struct BahdResult {
  double value = 0.0;
  bool sentinel = false;  // exactly one of the masks was empty
};

// Balanced average Hausdorff distance on the `cls` foreground; both directed
// sums are normalized by |G|.
BahdResult bahd(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls = 1);

enum class SoftGt { RaterMean, PerRater };

struct SoftScores {
  double dsc = 0.0;
  double iou = 0.0;
  std::vector<double> per_threshold_dsc;
  std::vector<double> per_threshold_iou;
};

// Binary task: class 1 of `pred` is the foreground probability.
SoftScores soft_metrics(const ProbabilityMap& pred, const AnnotationStack& stack,
                        std::span<const double> thresholds = kDefaultThresholds,
                        SoftGt mode = SoftGt::RaterMean);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
  std::size_t flagged = 0;
};

MetricSummary summarize(std::span<const double> values);

struct EvalRecord {
  std::size_t image = 0;
  std::string metric;
  double value = 0.0;
  bool flagged = false;
};

struct EvalReport {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<EvalRecord> records;

  void add(std::size_t image, const std::string& metric, double value, bool flagged = false);
  std::vector<std::string> metric_names() const;
  std::vector<double> values(const std::string& metric) const;
  std::map<std::string, MetricSummary> aggregate() const;

  // Rows: image,method,metric,value,flagged
  std::string to_csv(bool header = true) const;
  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
};

}  // namespace labelfill
