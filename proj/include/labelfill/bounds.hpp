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
#include <span>
#include <string>
#include <vector>

namespace labelfill {

// R raters, C of whom dissent from the qualified label (T = R - C agree).
struct BoundParams {
  std::size_t raters = 0;
  std::size_t dissent = 0;
  std::size_t classes = 2;
  double p_min = 0.0;
  double p_max = 0.0;
  std::vector<double> p;  // optional per-rater correctness; overrides p_min/p_max

  static BoundParams from_list(std::size_t dissent, std::vector<double> p, std::size_t classes = 2);
  static BoundParams uniform(std::size_t raters, std::size_t dissent, double p_min, double p_max,
                             std::size_t classes = 2);
  // Throws a Hypothesis error unless 1/2 < p_min <= p_max < 1, C < R, L >= 2.
  void validate() const;
};

struct LemmaReport {
  std::size_t trials = 0;
  std::size_t checks = 0;
  std::size_t violations = 0;
  double max_excess = 0.0;        // max of p(y~=l|y!=l) - (1 - p_r)
  double max_route_gap = 0.0;     // |direct - marginal route| across checks
  bool passed() const { return violations == 0; }
};

// Samples full L x L confusion matrices with diagonal p_r and Dirichlet(1)
// off-diagonal mass under a uniform class prior.
LemmaReport lemma_bound_check(double p_r, std::size_t classes, std::size_t trials, std::uint64_t seed);

// Two-class closed form.
double pgt_lower_bound(const BoundParams& params);

// Generic form for L >= 2; dissent_ratios holds one likelihood-ratio factor
// per dissenting rater.
double pgt_lower_bound_generic(std::size_t classes, std::size_t raters, double p_min,
                               std::span<const double> dissent_ratios);

struct RaterConfusion {
  double stay_true = 0.0;   // p(y~ = l | y = l)
  double stay_other = 0.0;  // p(y~ != l | y != l)
};

// Exact posterior that y = l given the first R - C raters vote l and the last
// C do not, uniform prior, computed in the log domain.
double pgt_exact(const BoundParams& params, std::span<const RaterConfusion> confusions);
// Symmetric raters with correctness params.p (or p_min for agreers and p_max
// for dissenters when no list is set).
double pgt_exact(const BoundParams& params);

inline constexpr std::size_t kMaxExactRaters = 20;

struct BoundRow {
  std::size_t raters = 0, dissent = 0;
  double p_min = 0.0, p_max = 0.0;
  double lower_bound = 0.0;
  double exact_min = 0.0;
};

struct BoundGrid {
  std::vector<std::size_t> raters;
  std::vector<std::size_t> dissent;
  std::vector<double> p_min;
  std::vector<double> p_max;
};

// Cells violating C < R or p_min <= p_max are skipped.
std::vector<BoundRow> bound_sweep(const BoundGrid& grid);
std::string bound_csv(std::span<const BoundRow> rows);

// Smallest R whose bound exceeds 1 - eps, searching up to max_raters.
std::size_t raters_for_confidence(std::size_t dissent, double p_min, double p_max, double eps,
                                  std::size_t max_raters = 100000);

}  // namespace labelfill
