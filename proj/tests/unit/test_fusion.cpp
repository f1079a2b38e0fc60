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

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "labelfill/fusion.hpp"
#include "labelfill/rater_sim.hpp"
#include "support.hpp"

using namespace labelfill;
using labelfill::testing::kind_of;
using labelfill::testing::map_from;
using labelfill::testing::message_of;
using labelfill::testing::random_binary_map;

namespace {

AnnotationStack random_stack(std::size_t r, std::size_t h, std::size_t w, std::size_t classes, Rng& rng) {
  std::vector<LabelMap> maps;
  for (std::size_t k = 0; k < r; ++k) {
    LabelMap m(h, w);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<std::uint8_t>(rng.below(classes));
    maps.push_back(m);
  }
  return AnnotationStack(std::move(maps));
}

AnnotationStack permuted(const AnnotationStack& s, Rng& rng) {
  auto maps = s.maps();
  for (std::size_t i = maps.size(); i > 1; --i) std::swap(maps[i - 1], maps[rng.below(i)]);
  return AnnotationStack(std::move(maps));
}

}  // namespace

TEST_CASE("vote counts") {
  const AnnotationStack s({map_from({"1"}), map_from({"1"}), map_from({"."})});
  const auto c = vote_counts(s, 2);
  CHECK(c(0, 0, 0) == 1);
  CHECK(c(0, 0, 1) == 2);
  const AnnotationStack u({map_from({"1."}), map_from({"1."}), map_from({"1."})});
  const auto cu = vote_counts(u, 2);
  CHECK(cu(0, 0, 1) == 3);
  CHECK(cu(0, 1, 0) == 3);
  CHECK(cu(0, 0, 0) == 0);
  const AnnotationStack bad({map_from({".."}), map_from({".2"})});
  CHECK(kind_of([&] { vote_counts(bad, 2); }) == ErrorKind::Data);
  CHECK(message_of([&] { vote_counts(bad, 2); }).find("(0,1)") != std::string::npos);
}

TEST_CASE("vote counts sum to R against a recount") {
  Rng rng(8);
  for (int t = 0; t < 30; ++t) {
    const std::size_t r = 2 + rng.below(6), l = 2 + rng.below(3);
    const auto s = random_stack(r, 5, 6, l, rng);
    const auto c = vote_counts(s, l);
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 6; ++j) {
        std::size_t total = 0;
        for (std::size_t k = 0; k < l; ++k) {
          std::size_t recount = 0;
          for (std::size_t q = 0; q < r; ++q) recount += s[q](i, j) == k;
          REQUIRE(c(i, j, k) == recount);
          total += c(i, j, k);
        }
        REQUIRE(total == r);
      }
    }
  }
}

TEST_CASE("majority vote with ties toward class 0") {
  // Every 2-class split of four votes.
  for (int ones = 0; ones <= 4; ++ones) {
    std::vector<LabelMap> maps;
    for (int r = 0; r < 4; ++r) maps.push_back(map_from({r < ones ? "1" : "."}));
    const auto mv = majority_vote(vote_counts(AnnotationStack(maps), 2));
    CHECK(mv(0, 0) == (ones > 2 ? 1 : 0));
  }
  const AnnotationStack s({map_from({"1"}), map_from({"1"}), map_from({"."})});
  CHECK(majority_vote(vote_counts(s, 2))(0, 0) == 1);
  const AnnotationStack three({map_from({"2"}), map_from({"1"}), map_from({"."})});
  CHECK(majority_vote(vote_counts(three, 3))(0, 0) == 0);
}

TEST_CASE("threshold mask") {
  auto five = [](int ones) {
    std::vector<LabelMap> maps;
    for (int r = 0; r < 5; ++r) maps.push_back(map_from({r < ones ? "1" : "."}));
    return vote_counts(AnnotationStack(maps), 2);
  };
  CHECK(threshold_mask(five(1), 4)[0]);  // counts (4,1)
  CHECK(!threshold_mask(five(2), 4)[0]); // counts (3,2)
  CHECK(threshold_mask(five(5), 5)[0]);
  CHECK(!threshold_mask(five(4), 5)[0]);
  CHECK(kind_of([&] { threshold_mask(five(1), 0); }) == ErrorKind::Usage);
  CHECK(kind_of([&] { threshold_mask(five(1), 6); }) == ErrorKind::Usage);
  CHECK(default_beta(5) == 4);
}

TEST_CASE("threshold mask is monotone in beta and restricts majority vote") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto s = random_stack(5, 6, 6, 2, rng);
    const auto c = vote_counts(s, 2);
    for (std::size_t b = 1; b < 5; ++b) {
      const auto lo = threshold_mask(c, b), hi = threshold_mask(c, b + 1);
      for (std::size_t k = 0; k < lo.size(); ++k) REQUIRE((!hi[k] || lo[k]));
    }
    const auto q = qmv_targets(s, 2, 4);
    CHECK(q.labels == majority_vote(c));
  }
}

TEST_CASE("mean fusion") {
  const AnnotationStack s({map_from({"1"}), map_from({"1"}), map_from({"."}), map_from({"."})});
  const auto m = mean_fusion(s, 2);
  CHECK(m(0, 0, 0) == 0.5);
  CHECK(m(1, 0, 0) == 0.5);
  const AnnotationStack u({map_from({"1"}), map_from({"1"})});
  CHECK(mean_fusion(u, 2)(1, 0, 0) == 1.0);
  Rng rng(12);
  for (int t = 0; t < 10; ++t) {
    const auto r = random_stack(3, 4, 4, 3, rng);
    const auto p = mean_fusion(r, 3);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        CHECK(p(0, i, j) + p(1, i, j) + p(2, i, j) == doctest::Approx(1.0).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("fusion is invariant to rater order") {
  Rng rng(31);
  for (int t = 0; t < 10; ++t) {
    const auto s = random_stack(5, 5, 5, 2, rng);
    const auto p = permuted(s, rng);
    CHECK(majority_vote(vote_counts(s, 2)) == majority_vote(vote_counts(p, 2)));
    CHECK(qmv_targets(s, 2, 4).mask == qmv_targets(p, 2, 4).mask);
    CHECK(mean_fusion(s, 2).tensor() == mean_fusion(p, 2).tensor());
    const auto a = staple(s), b = staple(p);
    for (std::size_t k = 0; k < a.posterior.tensor().size(); ++k) {
      REQUIRE(a.posterior.tensor()[k] == doctest::Approx(b.posterior.tensor()[k]).epsilon(1e-9));
    }
  }
}

TEST_CASE("qmv targets") {
  const auto gt = map_from({"..11", ".11.", "...."});
  const std::vector<RaterProfile> good(5, {RaterKind::Good, 0, 0});
  const auto all = qmv_targets(simulate_stack(gt, good), 2, 4);
  CHECK(all.labels == gt);
  CHECK(all.mask.count() == gt.size());

  const auto digit = map_from({"..........", "...1111...", "..11..11..", "......11..", ".....11...",
                               "....11....", "...11.....", "..111111..", "..........", ".........."});
  const auto stack = simulate_stack(digit, default_profiles(1), 0);
  const auto q = qmv_targets(stack, 2, default_beta(stack.raters()));
  CHECK(q.mask.count() > 0);
  CHECK(q.mask.count() < digit.size());
}

TEST_CASE("staple on unanimous raters") {
  const auto gt = map_from({"..11", ".11.", "...."});
  const AnnotationStack s({gt, gt, gt});
  const auto res = staple(s);
  CHECK(res.converged);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (gt(i, j)) CHECK(res.posterior(1, i, j) >= 0.99);
      else CHECK(res.posterior(1, i, j) < 0.01);
    }
  }
  CHECK(res.posterior.argmax() == gt);
}

TEST_CASE("staple hand trace: blank rater plus exact rater") {
  // 3x3 grid with f = 3 foreground pixels. Initial posterior W0 = mean fusion
  // (0.5 on G, 0 elsewhere), prior pi = 1.5/9 = 1/6.
  // M-step: blank p=0 q=1; exact p = 1.5/1.5 = 1, q = 6/(6+1.5) = 0.8.
  // E-step on G: a = pi * 1 * 1 = 1/6, b = (5/6) * 1 * 0.2 = 1/6 -> W = 0.5.
  // Off G: a = pi * 1 * (1 - 1) = 0 -> W = 0. Unchanged, so iterations 2 and
  // 3 repeat the same parameters.
  const auto gt = map_from({".1.", ".11", "..."});
  const AnnotationStack s({LabelMap(3, 3), gt});
  StapleOptions opt;
  opt.max_iters = 3;
  const auto res = staple(s, opt);
  CHECK(res.prior == doctest::Approx(1.0 / 6));
  REQUIRE(res.sensitivity_trace.size() >= 2);
  for (std::size_t it = 0; it < res.sensitivity_trace.size(); ++it) {
    CHECK(res.sensitivity_trace[it][0] == 0.0);
    CHECK(res.specificity_trace[it][0] == 1.0);
    CHECK(res.sensitivity_trace[it][1] == doctest::Approx(1.0));
    CHECK(res.specificity_trace[it][1] == doctest::Approx(0.8));
  }
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(res.posterior(1, i, j) == doctest::Approx(gt(i, j) ? 0.5 : 0.0).epsilon(1e-12));
    }
  }
  CHECK(res.converged);
}

TEST_CASE("staple degenerate stack") {
  const AnnotationStack s({LabelMap(3, 3), LabelMap(3, 3)});
  const auto res = staple(s);
  CHECK(res.degenerate);
  CHECK(res.posterior.argmax().count(1) == 0);
  CHECK(kind_of([] { staple(AnnotationStack({LabelMap(2, 2)})); }) == ErrorKind::Usage);
}

TEST_CASE("staple parameters stay in range and the objective never drops") {
  Rng rng(77);
  for (int t = 0; t < 25; ++t) {
    const std::size_t r = 2 + rng.below(5);
    std::vector<LabelMap> maps;
    const auto base = random_binary_map(8, 8, rng, 0.3);
    for (std::size_t k = 0; k < r; ++k) {
      auto m = base;
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (rng.uniform() < 0.2) m[i] = 1 - m[i];
      }
      maps.push_back(m);
    }
    const auto res = staple(AnnotationStack(maps));
    for (std::size_t it = 0; it < res.sensitivity_trace.size(); ++it) {
      for (std::size_t k = 0; k < r; ++k) {
        REQUIRE(res.sensitivity_trace[it][k] >= 0.0);
        REQUIRE(res.sensitivity_trace[it][k] <= 1.0);
        REQUIRE(res.specificity_trace[it][k] >= 0.0);
        REQUIRE(res.specificity_trace[it][k] <= 1.0);
      }
    }
    for (std::size_t it = 1; it < res.log_likelihood.size(); ++it) {
      REQUIRE(res.log_likelihood[it] >= res.log_likelihood[it - 1] - 1e-9);
    }
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t j = 0; j < 8; ++j) {
        REQUIRE(res.posterior(0, i, j) + res.posterior(1, i, j) == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
}
