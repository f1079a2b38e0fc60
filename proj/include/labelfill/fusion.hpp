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
#include <string>
#include <utility>
#include <vector>

#include "labelfill/labels.hpp"

namespace labelfill {

class VoteCounts {
 public:
  VoteCounts(std::size_t height, std::size_t width, std::size_t classes, std::size_t raters);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t classes() const noexcept { return classes_; }
  std::size_t raters() const noexcept { return raters_; }

  std::uint32_t operator()(std::size_t i, std::size_t j, std::size_t l) const {
    return counts_[(i * width_ + j) * classes_ + l];
  }
  std::uint32_t& operator()(std::size_t i, std::size_t j, std::size_t l) {
    return counts_[(i * width_ + j) * classes_ + l];
  }

  // Largest count at (i,j), ties toward the smallest class.
  std::size_t argmax(std::size_t i, std::size_t j) const;
  std::uint32_t max_count(std::size_t i, std::size_t j) const;

 private:
  std::size_t height_, width_, classes_, raters_;
  std::vector<std::uint32_t> counts_;
};

VoteCounts vote_counts(const AnnotationStack& stack, std::size_t classes);
LabelMap majority_vote(const VoteCounts& counts);
TrustMask threshold_mask(const VoteCounts& counts, std::size_t beta);
ProbabilityMap mean_fusion(const AnnotationStack& stack, std::size_t classes);

// R - 1, but never below 1.
std::size_t default_beta(std::size_t raters);

struct StapleOptions {
  int max_iters = 100;
  double tol = 1e-6;
};

struct StapleResult {
  ProbabilityMap posterior;          // 2 x H x W
  std::vector<double> sensitivity;   // p_r
  std::vector<double> specificity;   // q_r
  double prior = 0.0;                // fixed foreground prior
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;
  // Observed-data log-likelihood after each E-step; EM never decreases it.
  std::vector<double> log_likelihood;
  // Parameter estimates after each M-step, for inspection.
  std::vector<std::vector<double>> sensitivity_trace;
  std::vector<std::vector<double>> specificity_trace;
};

StapleResult staple(const AnnotationStack& stack, const StapleOptions& options = {});

struct QmvTargets {
  LabelMap labels;
  TrustMask mask;
};

QmvTargets qmv_targets(const AnnotationStack& stack, std::size_t classes, std::size_t beta);

enum class FusionMethod { Mv, Qmv, Mean, Staple };

const char* to_string(FusionMethod method);
FusionMethod parse_fusion_method(const std::string& name);

}  // namespace labelfill
