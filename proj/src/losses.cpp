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

#include "labelfill/losses.hpp"

#include "labelfill/error.hpp"

namespace labelfill {

namespace {

void check_batch(const Shape& s, std::size_t n, std::size_t h, std::size_t w, const char* what) {
  require(s.size() == 4 && s[0] == n && s[2] == h && s[3] == w, ErrorKind::Dimension,
          std::string(what) + ": activations " + shape_string(s) + " do not match " +
              std::to_string(n) + " targets of " + std::to_string(h) + "x" + std::to_string(w));
}

// [N,L,H,W] mask weights broadcast over classes.
Tensor mask_weights(std::span<const TrustMask* const> masks, const Shape& s) {
  Tensor w(s, 1.0);
  if (masks.empty()) return w;
  const std::size_t n = s[0], l = s[1], hw = s[2] * s[3];
  require(masks.size() == n, ErrorKind::Dimension,
          "got " + std::to_string(masks.size()) + " masks for a batch of " + std::to_string(n));
  for (std::size_t b = 0; b < n; ++b) {
    require(masks[b]->height() == s[2] && masks[b]->width() == s[3], ErrorKind::Dimension,
            "mask extent differs from the activations");
    for (std::size_t c = 0; c < l; ++c) {
      for (std::size_t p = 0; p < hw; ++p) w[(b * l + c) * hw + p] = (*masks[b])[p] ? 1.0 : 0.0;
    }
  }
  return w;
}

}  // namespace

Tensor target_weights(std::span<const LabelMap* const> labels,
                      std::span<const TrustMask* const> masks, std::size_t classes) {
  require(!labels.empty(), ErrorKind::Usage, "no target labels");
  const std::size_t n = labels.size(), h = labels[0]->height(), w = labels[0]->width();
  require(masks.empty() || masks.size() == n, ErrorKind::Dimension,
          "got " + std::to_string(masks.size()) + " masks for " + std::to_string(n) + " label maps");
  Tensor out(Shape{n, classes, h, w});
  for (std::size_t b = 0; b < n; ++b) {
    const LabelMap& m = *labels[b];
    require(m.height() == h && m.width() == w, ErrorKind::Dimension, "label maps in a batch differ in extent");
    if (!masks.empty()) {
      require(masks[b]->height() == h && masks[b]->width() == w, ErrorKind::Dimension,
              "mask extent differs from its label map");
    }
    for (std::size_t p = 0; p < h * w; ++p) {
      require(m[p] < classes, ErrorKind::Data, "target label " + std::to_string(m[p]) + " out of range");
      if (masks.empty() || (*masks[b])[p]) out[(b * classes + m[p]) * h * w + p] = 1.0;
    }
  }
  return out;
}

ad::Var weighted_nll(ad::Var probs, const Tensor& weights) {
  require(probs.shape() == weights.shape(), ErrorKind::Dimension,
          "probabilities " + shape_string(probs.shape()) + " vs targets " + shape_string(weights.shape()));
  return ad::neg(ad::weighted_sum(ad::log_clamped(probs, kProbFloor), weights));
}

ad::Var loss_sll(ad::Var probs, std::span<const LabelMap* const> mv,
                 std::span<const TrustMask* const> masks) {
  require(!mv.empty(), ErrorKind::Usage, "empty batch");
  check_batch(probs.shape(), mv.size(), mv[0]->height(), mv[0]->width(), "masked NLL");
  return weighted_nll(probs, target_weights(mv, masks, probs.shape()[1]));
}

ad::Var loss_ce(ad::Var probs, std::span<const LabelMap* const> mv,
                std::span<const TrustMask* const> masks) {
  return loss_sll(probs, mv, masks);
}

ad::Var loss_sl(const Tensor& teacher_activations, ad::Var student_activations,
                std::span<const TrustMask* const> masks, double tau) {
  require(tau > 0.0, ErrorKind::Usage, "temperature tau must be positive, got " + std::to_string(tau));
  require(teacher_activations.shape() == student_activations.shape(), ErrorKind::Dimension,
          "teacher " + shape_string(teacher_activations.shape()) + " vs student " +
              shape_string(student_activations.shape()));
  require(teacher_activations.ndim() == 4, ErrorKind::Dimension, "activations must be [N,L,H,W]");
  Tensor weights = ad::softmax_channel(teacher_activations, tau);
  const Tensor m = mask_weights(masks, weights.shape());
  for (std::size_t k = 0; k < weights.size(); ++k) weights[k] *= m[k];
  const ad::Var q2 = ad::softmax_channel(student_activations, tau);
  return ad::scale(weighted_nll(q2, weights), tau * tau);
}

ad::Var loss_sl(ad::Var teacher_activations, ad::Var student_activations,
                std::span<const TrustMask* const> masks, double tau) {
  return loss_sl(teacher_activations.value(), student_activations, masks, tau);
}

ad::Var loss_rcl(std::span<const ad::Var> head_probs, std::span<const AnnotationStack* const> stacks) {
  require(!head_probs.empty() && !stacks.empty(), ErrorKind::Usage, "loss_rcl needs heads and stacks");
  const std::size_t r = head_probs.size();
  for (const auto* s : stacks) {
    require(s->raters() == r, ErrorKind::Configuration,
            std::to_string(r) + " heads but a stack has " + std::to_string(s->raters()) + " raters");
  }
  std::optional<ad::Var> total;
  std::vector<const LabelMap*> labels(stacks.size());
  for (std::size_t k = 0; k < r; ++k) {
    for (std::size_t b = 0; b < stacks.size(); ++b) labels[b] = &(*stacks[b])[k];
    check_batch(head_probs[k].shape(), stacks.size(), labels[0]->height(), labels[0]->width(), "rater head");
    const ad::Var term = weighted_nll(head_probs[k], target_weights(labels, {}, head_probs[k].shape()[1]));
    total = total ? ad::add(*total, term) : term;
  }
  return *total;
}

ad::Var loss_seg(ad::Graph& graph, const LossComponents& parts, double lambda) {
  require(lambda >= 0.0, ErrorKind::Usage, "lambda must be nonnegative, got " + std::to_string(lambda));
  std::optional<ad::Var> total;
  auto accumulate = [&](ad::Var v) { total = total ? ad::add(*total, v) : v; };
  if (parts.sl) accumulate(*parts.sl);
  if (parts.ce) accumulate(*parts.ce);
  if (parts.rcl) accumulate(ad::scale(*parts.rcl, lambda));
  return total ? *total : graph.constant(Tensor::scalar(0.0));
}

}  // namespace labelfill
