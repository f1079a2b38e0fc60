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

#include "labelfill/rater_sim.hpp"

#include <cstdlib>

#include "labelfill/error.hpp"
#include "labelfill/metrics.hpp"
#include "labelfill/rng.hpp"

namespace labelfill {

const char* to_string(RaterKind kind) {
  switch (kind) {
    case RaterKind::Good: return "good";
    case RaterKind::Over: return "over";
    case RaterKind::Under: return "under";
    case RaterKind::Wrong: return "wrong";
    case RaterKind::Blank: return "blank";
  }
  return "?";
}

RaterKind parse_rater_kind(const std::string& name) {
  for (RaterKind k : {RaterKind::Good, RaterKind::Over, RaterKind::Under, RaterKind::Wrong,
                      RaterKind::Blank}) {
    if (name == to_string(k)) return k;
  }
  fail(ErrorKind::Configuration,
       "unknown rater kind '" + name + "' (expected good, over, under, wrong or blank)");
}

std::vector<RaterProfile> default_profiles(std::uint64_t seed) {
  return {{RaterKind::Good, 0, mix_seed(seed, 0)},
          {RaterKind::Over, 2, mix_seed(seed, 1)},
          {RaterKind::Under, 1, mix_seed(seed, 2)},
          {RaterKind::Wrong, 3, mix_seed(seed, 3)},
          {RaterKind::Blank, 0, mix_seed(seed, 4)}};
}

namespace {

// Out-of-grid neighbours count as background.
LabelMap morph_step(const LabelMap& m, bool dilation) {
  const long h = static_cast<long>(m.height()), w = static_cast<long>(m.width());
  LabelMap out(m.height(), m.width());
  for (long i = 0; i < h; ++i) {
    for (long j = 0; j < w; ++j) {
      bool any = false, all = true;
      for (long di = -1; di <= 1; ++di) {
        for (long dj = -1; dj <= 1; ++dj) {
          const long a = i + di, b = j + dj;
          const bool fg = a >= 0 && a < h && b >= 0 && b < w &&
                          m(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) != 0;
          any = any || fg;
          all = all && fg;
        }
      }
      out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = (dilation ? any : all) ? 1 : 0;
    }
  }
  return out;
}

void require_binary(const LabelMap& gt, RaterKind kind) {
  require(gt.max_label() <= 1, ErrorKind::Usage,
          std::string("rater kind '") + to_string(kind) +
              "' needs a binary ground truth, found label " + std::to_string(gt.max_label()));
}

}  // namespace

LabelMap dilate(const LabelMap& map, int iterations) {
  LabelMap out = map;
  for (int k = 0; k < iterations; ++k) out = morph_step(out, true);
  return out;
}

LabelMap erode(const LabelMap& map, int iterations) {
  LabelMap out = map;
  for (int k = 0; k < iterations; ++k) out = morph_step(out, false);
  return out;
}

LabelMap translate(const LabelMap& map, int di, int dj) {
  const long h = static_cast<long>(map.height()), w = static_cast<long>(map.width());
  LabelMap out(map.height(), map.width());
  for (long i = 0; i < h; ++i) {
    for (long j = 0; j < w; ++j) {
      const auto v = map(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      if (v == 0) continue;
      const long a = i + di, b = j + dj;
      if (a >= 0 && a < h && b >= 0 && b < w) out(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) = v;
    }
  }
  return out;
}

std::pair<int, int> wrong_offset(int strength, std::uint64_t seed) {
  require(strength >= 1, ErrorKind::Configuration, "wrong rater needs strength >= 1");
  std::vector<std::pair<int, int>> ring;
  for (int di = -strength; di <= strength; ++di) {
    for (int dj = -strength; dj <= strength; ++dj) {
      if (std::max(std::abs(di), std::abs(dj)) == strength) ring.emplace_back(di, dj);
    }
  }
  Rng rng(seed);
  return ring[rng.below(ring.size())];
}

LabelMap simulate_rater(const LabelMap& gt, const RaterProfile& profile) {
  switch (profile.kind) {
    case RaterKind::Good:
      return gt;
    case RaterKind::Blank:
      return LabelMap(gt.height(), gt.width());
    case RaterKind::Over:
    case RaterKind::Under:
    case RaterKind::Wrong: {
      require_binary(gt, profile.kind);
      require(profile.strength >= 1, ErrorKind::Configuration,
              std::string("rater kind '") + to_string(profile.kind) + "' needs strength >= 1, got " +
                  std::to_string(profile.strength));
      if (profile.kind == RaterKind::Over) return dilate(gt, profile.strength);
      if (profile.kind == RaterKind::Under) return erode(gt, profile.strength);
      const auto [di, dj] = wrong_offset(profile.strength, profile.seed);
      return translate(gt, di, dj);
    }
  }
  fail(ErrorKind::Configuration, "invalid rater kind");
}

AnnotationStack simulate_stack(const LabelMap& gt, std::span<const RaterProfile> profiles,
                               std::uint64_t image_index) {
  require(!profiles.empty(), ErrorKind::Usage, "simulate_stack needs at least one rater profile");
  std::vector<LabelMap> maps;
  maps.reserve(profiles.size());
  for (RaterProfile p : profiles) {
    p.seed = mix_seed(p.seed, image_index);
    maps.push_back(simulate_rater(gt, p));
  }
  return AnnotationStack(std::move(maps));
}

double stack_average_dsc(const AnnotationStack& stack, const LabelMap& gt) {
  require(stack.raters() > 0, ErrorKind::Usage, "empty annotation stack");
  double total = 0.0;
  for (const auto& m : stack.maps()) total += dsc(m, gt, 1);
  return total / static_cast<double>(stack.raters());
}

}  // namespace labelfill
