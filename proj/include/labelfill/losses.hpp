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
#include <optional>
#include <span>

#include "labelfill/autodiff.hpp"
#include "labelfill/labels.hpp"

namespace labelfill {

inline constexpr double kProbFloor = 1e-12;

// One-hot weights [N,L,H,W] of `labels`, zeroed where the mask is 0. An empty
// mask list means every pixel counts.
Tensor target_weights(std::span<const LabelMap* const> labels,
                      std::span<const TrustMask* const> masks, std::size_t classes);

// -sum weights * log(max(probs, floor)).
ad::Var weighted_nll(ad::Var probs, const Tensor& weights);

// Masked negative log-probability of the majority label; probs are [N,L,H,W].
ad::Var loss_sll(ad::Var probs, std::span<const LabelMap* const> mv,
                 std::span<const TrustMask* const> masks);
ad::Var loss_ce(ad::Var probs, std::span<const LabelMap* const> mv,
                std::span<const TrustMask* const> masks);

// -tau^2 * sum m * softmax(a1/tau) * log softmax(a2/tau). The teacher enters
// only through its value.
ad::Var loss_sl(const Tensor& teacher_activations, ad::Var student_activations,
                std::span<const TrustMask* const> masks, double tau);
ad::Var loss_sl(ad::Var teacher_activations, ad::Var student_activations,
                std::span<const TrustMask* const> masks, double tau);

// Unmasked per-head cross-entropy against rater r of each stack.
ad::Var loss_rcl(std::span<const ad::Var> head_probs, std::span<const AnnotationStack* const> stacks);

struct LossComponents {
  std::optional<ad::Var> sl;
  std::optional<ad::Var> ce;
  std::optional<ad::Var> rcl;
};

// L_sl + L_ce + lambda * L_rcl over the components present.
ad::Var loss_seg(ad::Graph& graph, const LossComponents& parts, double lambda);

}  // namespace labelfill
