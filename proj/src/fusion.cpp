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

#include "labelfill/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "labelfill/error.hpp"

namespace labelfill {

VoteCounts::VoteCounts(std::size_t height, std::size_t width, std::size_t classes,
                       std::size_t raters)
    : height_(height), width_(width), classes_(classes), raters_(raters),
      counts_(height * width * classes, 0) {}

std::size_t VoteCounts::argmax(std::size_t i, std::size_t j) const {
  std::size_t best = 0;
  for (std::size_t l = 1; l < classes_; ++l) {
    if ((*this)(i, j, l) > (*this)(i, j, best)) best = l;
  }
  return best;
}

std::uint32_t VoteCounts::max_count(std::size_t i, std::size_t j) const {
  return (*this)(i, j, argmax(i, j));
}

VoteCounts vote_counts(const AnnotationStack& stack, std::size_t classes) {
  require(classes >= 2, ErrorKind::Configuration, "class count must be at least 2");
  require(stack.raters() > 0, ErrorKind::Usage, "vote_counts on an empty stack");
  VoteCounts counts(stack.height(), stack.width(), classes, stack.raters());
  for (std::size_t r = 0; r < stack.raters(); ++r) {
    const LabelMap& m = stack[r];
    for (std::size_t i = 0; i < m.height(); ++i) {
      for (std::size_t j = 0; j < m.width(); ++j) {
        const std::size_t l = m(i, j);
        require(l < classes, ErrorKind::Data,
                "rater " + std::to_string(r) + " has label " + std::to_string(l) +
                    " at pixel (" + std::to_string(i) + "," + std::to_string(j) +
                    "), outside [0," + std::to_string(classes) + ")");
        ++counts(i, j, l);
      }
    }
  }
  return counts;
}

LabelMap majority_vote(const VoteCounts& counts) {
  LabelMap out(counts.height(), counts.width());
  for (std::size_t i = 0; i < counts.height(); ++i) {
    for (std::size_t j = 0; j < counts.width(); ++j) {
      out(i, j) = static_cast<std::uint8_t>(counts.argmax(i, j));
    }
  }
  return out;
}

TrustMask threshold_mask(const VoteCounts& counts, std::size_t beta) {
  require(beta >= 1 && beta <= counts.raters(), ErrorKind::Usage,
          "beta " + std::to_string(beta) + " outside [1," + std::to_string(counts.raters()) + "]");
  LabelMap bits(counts.height(), counts.width());
  for (std::size_t i = 0; i < counts.height(); ++i) {
    for (std::size_t j = 0; j < counts.width(); ++j) {
      bits(i, j) = counts.max_count(i, j) >= beta ? 1 : 0;
    }
  }
  return TrustMask(std::move(bits));
}

ProbabilityMap mean_fusion(const AnnotationStack& stack, std::size_t classes) {
  const VoteCounts counts = vote_counts(stack, classes);
  ProbabilityMap out(classes, stack.height(), stack.width());
  const double r = static_cast<double>(stack.raters());
  for (std::size_t l = 0; l < classes; ++l) {
    for (std::size_t i = 0; i < stack.height(); ++i) {
      for (std::size_t j = 0; j < stack.width(); ++j) out(l, i, j) = counts(i, j, l) / r;
    }
  }
  return out;
}

std::size_t default_beta(std::size_t raters) { return raters > 1 ? raters - 1 : 1; }

StapleResult staple(const AnnotationStack& stack, const StapleOptions& options) {
  require(stack.raters() >= 2, ErrorKind::Usage, "STAPLE needs at least two raters");
  require(options.max_iters >= 1 && options.tol > 0.0, ErrorKind::Configuration,
          "STAPLE needs max_iters >= 1 and tol > 0");
  const std::size_t h = stack.height(), w = stack.width(), n = h * w, nr = stack.raters();
  const ProbabilityMap mean = mean_fusion(stack, 2);

  StapleResult res;
  res.posterior = ProbabilityMap(2, h, w);
  std::vector<double> weight(n);
  double fg = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    weight[k] = mean(1, k / w, k % w);
    fg += weight[k];
  }
  res.prior = n > 0 ? fg / static_cast<double>(n) : 0.0;
  res.sensitivity.assign(nr, 0.0);
  res.specificity.assign(nr, 1.0);

  auto store = [&] {
    for (std::size_t k = 0; k < n; ++k) {
      res.posterior(1, k / w, k % w) = weight[k];
      res.posterior(0, k / w, k % w) = 1.0 - weight[k];
    }
  };

  if (res.prior <= 0.0 || res.prior >= 1.0) {
    // All raters blank (or all full): nothing to estimate.
    res.degenerate = true;
    res.converged = true;
    std::fill(weight.begin(), weight.end(), res.prior >= 1.0 ? 1.0 : 0.0);
    if (res.prior >= 1.0) {
      res.sensitivity.assign(nr, 1.0);
      res.specificity.assign(nr, 0.0);
    }
    store();
    return res;
  }

  const double prior = res.prior;
  for (int it = 0; it < options.max_iters; ++it) {
    double sw = 0.0, sb = 0.0;
    for (double x : weight) {
      sw += x;
      sb += 1.0 - x;
    }
    std::vector<double> p(nr, 0.0), q(nr, 1.0);
    for (std::size_t r = 0; r < nr; ++r) {
      double tp = 0.0, tn = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const bool d = stack[r][k] == 1;
        tp += d ? weight[k] : 0.0;
        tn += d ? 0.0 : 1.0 - weight[k];
      }
      p[r] = sw > 0.0 ? std::clamp(tp / sw, 0.0, 1.0) : 0.0;
      q[r] = sb > 0.0 ? std::clamp(tn / sb, 0.0, 1.0) : 1.0;
    }
    double change = 0.0;
    for (std::size_t r = 0; r < nr; ++r) {
      change = std::max({change, std::abs(p[r] - res.sensitivity[r]), std::abs(q[r] - res.specificity[r])});
    }
    res.sensitivity = p;
    res.specificity = q;
    res.sensitivity_trace.push_back(p);
    res.specificity_trace.push_back(q);

    double ll = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      double a = prior, b = 1.0 - prior;
      for (std::size_t r = 0; r < nr; ++r) {
        const bool d = stack[r][k] == 1;
        a *= d ? p[r] : 1.0 - p[r];
        b *= d ? 1.0 - q[r] : q[r];
      }
      if (a + b > 0.0) {
        weight[k] = a / (a + b);
        ll += std::log(a + b);
      } else {
        weight[k] = prior;
        ll += -std::numeric_limits<double>::infinity();
      }
    }
    res.log_likelihood.push_back(ll);
    res.iterations = it + 1;
    if (it > 0 && change < options.tol) {
      res.converged = true;
      break;
    }
  }
  store();
  return res;
}

QmvTargets qmv_targets(const AnnotationStack& stack, std::size_t classes, std::size_t beta) {
  const VoteCounts counts = vote_counts(stack, classes);
  return {majority_vote(counts), threshold_mask(counts, beta)};
}

const char* to_string(FusionMethod method) {
  switch (method) {
    case FusionMethod::Mv: return "mv";
    case FusionMethod::Qmv: return "qmv";
    case FusionMethod::Mean: return "mean";
    case FusionMethod::Staple: return "staple";
  }
  return "?";
}

FusionMethod parse_fusion_method(const std::string& name) {
  for (FusionMethod m : {FusionMethod::Mv, FusionMethod::Qmv, FusionMethod::Mean, FusionMethod::Staple}) {
    if (name == to_string(m)) return m;
  }
  fail(ErrorKind::Usage, "unknown fusion method '" + name + "' (expected mv, qmv, mean or staple)");
}

}  // namespace labelfill
