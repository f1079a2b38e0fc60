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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "labelfill/labels.hpp"

namespace labelfill {

enum class RaterKind { Good, Over, Under, Wrong, Blank };

const char* to_string(RaterKind kind);
RaterKind parse_rater_kind(const std::string& name);

struct RaterProfile {
  RaterKind kind = RaterKind::Good;
  int strength = 0;  // morphology iterations or displacement magnitude
  std::uint64_t seed = 0;

  bool operator==(const RaterProfile&) const = default;
};

// good, over 2, under 1, wrong 3, blank
std::vector<RaterProfile> default_profiles(std::uint64_t seed = 0);

LabelMap dilate(const LabelMap& map, int iterations);
LabelMap erode(const LabelMap& map, int iterations);
// Pixels moved off the grid are dropped.
LabelMap translate(const LabelMap& map, int di, int dj);

// Offset with Chebyshev norm `strength`, drawn uniformly from the 8*strength
// candidates.
std::pair<int, int> wrong_offset(int strength, std::uint64_t seed);

LabelMap simulate_rater(const LabelMap& gt, const RaterProfile& profile);

// Each profile seed is mixed with the image index.
AnnotationStack simulate_stack(const LabelMap& gt, std::span<const RaterProfile> profiles,
                               std::uint64_t image_index = 0);

// Mean over raters of the foreground DSC against gt.
double stack_average_dsc(const AnnotationStack& stack, const LabelMap& gt);

}  // namespace labelfill
