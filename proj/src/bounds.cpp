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

#include "labelfill/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "labelfill/error.hpp"
#include "labelfill/format.hpp"
#include "labelfill/rng.hpp"

namespace labelfill {

namespace {

// 1 / (1 + exp(x)) without overflow.
double logistic_neg(double x) {
  if (x > 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

std::string num(double x) { return format_double(x); }

}  // namespace

BoundParams BoundParams::from_list(std::size_t dissent, std::vector<double> p, std::size_t classes) {
  BoundParams b;
  b.raters = p.size();
  b.dissent = dissent;
  b.classes = classes;
  if (!p.empty()) {
    b.p_min = *std::min_element(p.begin(), p.end());
    b.p_max = *std::max_element(p.begin(), p.end());
  }
  b.p = std::move(p);
  return b;
}

BoundParams BoundParams::uniform(std::size_t raters, std::size_t dissent, double p_min,
                                 double p_max, std::size_t classes) {
  BoundParams b;
  b.raters = raters;
  b.dissent = dissent;
  b.classes = classes;
  b.p_min = p_min;
  b.p_max = p_max;
  return b;
}

void BoundParams::validate() const {
  require(classes >= 2, ErrorKind::Hypothesis, "class count must be at least 2");
  require(raters >= 1 && dissent < raters, ErrorKind::Hypothesis,
          "dissent count C=" + std::to_string(dissent) + " must be below R=" + std::to_string(raters));
  require(p.empty() || p.size() == raters, ErrorKind::Hypothesis,
          "per-rater list has " + std::to_string(p.size()) + " entries for R=" + std::to_string(raters));
  require(p_min > 0.5, ErrorKind::Hypothesis, "p_min=" + num(p_min) + " must exceed 1/2");
  require(p_max < 1.0, ErrorKind::Hypothesis, "p_max=" + num(p_max) + " must be below 1");
  require(p_min <= p_max, ErrorKind::Hypothesis,
          "p_min=" + num(p_min) + " exceeds p_max=" + num(p_max));
}

LemmaReport lemma_bound_check(double p_r, std::size_t classes, std::size_t trials, std::uint64_t seed) {
  require(classes >= 2, ErrorKind::Usage, "lemma check needs L >= 2");
  const double lo = 1.0 / static_cast<double>(classes);
  require(p_r > lo && p_r <= 1.0, ErrorKind::Usage,
          "p_r=" + num(p_r) + " must lie in (1/L, 1] for L=" + std::to_string(classes));
  Rng rng(seed);
  const std::size_t L = classes;
  LemmaReport rep;
  rep.trials = trials;
  std::vector<double> conf(L * L);
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t i = 0; i < L; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < L; ++j) {
        if (j == i) continue;
        const double e = -std::log1p(-rng.uniform());
        conf[i * L + j] = e;
        total += e;
      }
      for (std::size_t j = 0; j < L; ++j) {
        conf[i * L + j] = j == i ? p_r : (total > 0.0 ? (1.0 - p_r) * conf[i * L + j] / total : 0.0);
      }
    }
    const double prior = 1.0 / static_cast<double>(L);
    for (std::size_t l = 0; l < L; ++l) {
      // Direct conditional over the other classes.
      double off = 0.0;
      for (std::size_t i = 0; i < L; ++i) {
        if (i != l) off += conf[i * L + l] * prior;
      }
      const double direct = off / (1.0 - prior);
      // Through the label marginal: p(y~=l) = p_r/L + sum_{i!=l} p(y~=l|y=i)/L.
      double marginal = 0.0;
      for (std::size_t i = 0; i < L; ++i) marginal += conf[i * L + l] * prior;
      const double routed = (marginal - p_r * prior) / (1.0 - prior);
      rep.max_route_gap = std::max(rep.max_route_gap, std::abs(direct - routed));
      const double excess = direct - (1.0 - p_r);
      rep.max_excess = rep.checks == 0 ? excess : std::max(rep.max_excess, excess);
      ++rep.checks;
      if (excess > 1e-12) ++rep.violations;
    }
  }
  return rep;
}

double pgt_lower_bound(const BoundParams& params) {
  params.validate();
  require(params.classes == 2, ErrorKind::Hypothesis,
          "the closed-form bound is two-class; use pgt_lower_bound_generic for L=" +
              std::to_string(params.classes));
  const double t = static_cast<double>(params.raters - params.dissent);
  const double c = static_cast<double>(params.dissent);
  const double x = t * std::log((1.0 - params.p_min) / params.p_min) +
                   c * std::log(params.p_max / (1.0 - params.p_max));
  return logistic_neg(x);
}

double pgt_lower_bound_generic(std::size_t classes, std::size_t raters, double p_min,
                               std::span<const double> dissent_ratios) {
  require(classes >= 2, ErrorKind::Hypothesis, "class count must be at least 2");
  require(dissent_ratios.size() < raters, ErrorKind::Hypothesis,
          "dissent count must be below the rater count");
  require(p_min > 0.5 && p_min < 1.0, ErrorKind::Hypothesis, "p_min=" + num(p_min) + " outside (1/2,1)");
  const double t = static_cast<double>(raters - dissent_ratios.size());
  double x = std::log(static_cast<double>(classes - 1)) + t * std::log((1.0 - p_min) / p_min);
  for (double r : dissent_ratios) {
    require(r > 0.0 && std::isfinite(r), ErrorKind::Hypothesis,
            "dissent likelihood ratio " + num(r) + " must be positive and finite");
    x += std::log(r);
  }
  return logistic_neg(x);
}

double pgt_exact(const BoundParams& params, std::span<const RaterConfusion> confusions) {
  require(params.classes == 2, ErrorKind::Hypothesis, "exact posterior is two-class");
  require(params.raters <= kMaxExactRaters, ErrorKind::Feasibility,
          "exact posterior supports at most " + std::to_string(kMaxExactRaters) + " raters, got " +
              std::to_string(params.raters));
  require(confusions.size() == params.raters, ErrorKind::Hypothesis,
          "expected " + std::to_string(params.raters) + " rater confusions, got " +
              std::to_string(confusions.size()));
  require(params.dissent < params.raters, ErrorKind::Hypothesis, "dissent count must be below R");
  const std::size_t agree = params.raters - params.dissent;
  // log p(votes | y = l) and log p(votes | y != l); the uniform prior cancels.
  double log_true = 0.0, log_other = 0.0;
  for (std::size_t r = 0; r < params.raters; ++r) {
    const RaterConfusion& c = confusions[r];
    require(c.stay_true >= 0.0 && c.stay_true <= 1.0 && c.stay_other >= 0.0 && c.stay_other <= 1.0,
            ErrorKind::Hypothesis, "rater " + std::to_string(r) + " confusion entries outside [0,1]");
    if (r < agree) {
      log_true += std::log(c.stay_true);
      log_other += std::log1p(-c.stay_other);
    } else {
      log_true += std::log1p(-c.stay_true);
      log_other += std::log(c.stay_other);
    }
  }
  if (std::isinf(log_true) && std::isinf(log_other)) {
    fail(ErrorKind::Numeric, "vote configuration has zero probability under both classes");
  }
  return logistic_neg(log_other - log_true);
}

double pgt_exact(const BoundParams& params) {
  params.validate();
  std::vector<RaterConfusion> conf(params.raters);
  const std::size_t agree = params.raters - params.dissent;
  for (std::size_t r = 0; r < params.raters; ++r) {
    const double p = !params.p.empty() ? params.p[r] : (r < agree ? params.p_min : params.p_max);
    conf[r] = {p, p};
  }
  return pgt_exact(params, conf);
}

std::vector<BoundRow> bound_sweep(const BoundGrid& grid) {
  std::vector<BoundRow> rows;
  for (std::size_t r : grid.raters) {
    for (std::size_t c : grid.dissent) {
      if (c >= r) continue;
      for (double lo : grid.p_min) {
        for (double hi : grid.p_max) {
          if (lo > hi) continue;
          const BoundParams b = BoundParams::uniform(r, c, lo, hi);
          BoundRow row{r, c, lo, hi, pgt_lower_bound(b), 0.0};
          row.exact_min = r <= kMaxExactRaters ? pgt_exact(b) : row.lower_bound;
          rows.push_back(row);
        }
      }
    }
  }
  return rows;
}

std::string bound_csv(std::span<const BoundRow> rows) {
  std::ostringstream os;
  os << "R,C,p_min,p_max,lower_bound,exact_min\n";
  for (const auto& r : rows) {
    os << r.raters << ',' << r.dissent << ',' << format_double(r.p_min) << ','
       << format_double(r.p_max) << ',' << format_double(r.lower_bound) << ','
       << format_double(r.exact_min) << '\n';
  }
  return os.str();
}

std::size_t raters_for_confidence(std::size_t dissent, double p_min, double p_max, double eps,
                                  std::size_t max_raters) {
  require(eps > 0.0 && eps < 1.0, ErrorKind::Usage, "eps must lie in (0,1)");
  for (std::size_t r = dissent + 1; r <= max_raters; ++r) {
    if (pgt_lower_bound(BoundParams::uniform(r, dissent, p_min, p_max)) > 1.0 - eps) return r;
  }
  fail(ErrorKind::Feasibility, "no rater count up to " + std::to_string(max_raters) +
                                   " reaches confidence 1-" + num(eps));
}

}  // namespace labelfill
