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

#include "labelfill/training.hpp"

#include <cmath>
#include <sstream>

#include "labelfill/error.hpp"
#include "labelfill/format.hpp"
#include "labelfill/fusion.hpp"
#include "labelfill/losses.hpp"
#include "labelfill/metrics.hpp"
#include "labelfill/rng.hpp"

namespace labelfill {

AdamState adam_init(const ParameterSet& params) {
  AdamState s;
  for (const auto& e : params.entries()) {
    s.m.emplace_back(e.value.shape());
    s.v.emplace_back(e.value.shape());
  }
  return s;
}

void adam_step(ParameterSet& params, std::span<const Tensor> grads, AdamState& state, double lr) {
  require(grads.size() == params.size() && state.m.size() == params.size(), ErrorKind::Dimension,
          "Adam: " + std::to_string(grads.size()) + " gradients for " + std::to_string(params.size()) +
              " parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = params.entry(i);
    require(grads[i].shape() == e.value.shape(), ErrorKind::Dimension,
            "Adam: gradient for '" + e.key + "' has shape " + shape_string(grads[i].shape()));
    for (std::size_t k = 0; k < grads[i].size(); ++k) {
      if (!std::isfinite(grads[i][k])) {
        fail(ErrorKind::Numeric, "non-finite gradient for parameter '" + e.key + "' at flat index " +
                                     std::to_string(k));
      }
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = params.mutable_value(i);
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      w[k] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

const char* to_string(RcnBackbone b) { return b == RcnBackbone::Shared ? "shared" : "separate"; }

RcnBackbone parse_rcn_backbone(const std::string& name) {
  if (name == "separate") return RcnBackbone::Separate;
  if (name == "shared") return RcnBackbone::Shared;
  fail(ErrorKind::Configuration, "rcn_backbone must be 'separate' or 'shared', got '" + name + "'");
}

const char* to_string(TargetKind t) {
  switch (t) {
    case TargetKind::Mv: return "mv";
    case TargetKind::Mean: return "mean";
    case TargetKind::Staple: return "staple";
  }
  return "?";
}

TargetKind parse_target_kind(const std::string& name) {
  for (TargetKind t : {TargetKind::Mv, TargetKind::Mean, TargetKind::Staple}) {
    if (name == to_string(t)) return t;
  }
  fail(ErrorKind::Configuration, "unknown target kind '" + name + "'");
}

void TrainConfig::validate() const {
  require(lr > 0.0 && std::isfinite(lr), ErrorKind::Usage, "learning rate must be positive");
  require(batch >= 1, ErrorKind::Usage, "batch size must be at least 1");
  require(tau > 0.0 && std::isfinite(tau), ErrorKind::Usage, "tau must be positive, got " + format_double(tau));
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::Usage,
          "lambda must be nonnegative, got " + format_double(lambda));
  require(channels.size() >= 2, ErrorKind::Configuration, "channel list needs at least two entries");
}

Variant Variant::parse(const std::string& name) {
  Variant v;
  if (name == "mv") return v;
  if (name == "qmv") {
    v.tv = true;
    return v;
  }
  if (name == "lfnet") {
    v.tv = v.sls = v.rcls = true;
    return v;
  }
  if (name == "mean" || name == "staple") {
    v.target = parse_target_kind(name);
    return v;
  }
  std::stringstream ss(name);
  std::string tok;
  bool saw_s = false;
  while (std::getline(ss, tok, '+')) {
    if (tok == "S") saw_s = true;
    else if (tok == "TV") v.tv = true;
    else if (tok == "SLS") v.sls = true;
    else if (tok == "RCLS") v.rcls = true;
    else fail(ErrorKind::Usage, "unknown variant component '" + tok +
                                    "' (expected mv, qmv, lfnet, mean, staple or S[+TV][+SLS][+RCLS])");
  }
  require(saw_s, ErrorKind::Usage, "variant '" + name + "' must start from the base model S");
  return v;
}

std::string Variant::name() const {
  if (target != TargetKind::Mv) return to_string(target);
  std::string n = "S";
  if (tv) n += "+TV";
  if (sls) n += "+SLS";
  if (rcls) n += "+RCLS";
  if (!distill_mask) n += "(no-tv-distill)";
  if (!ce) n += "(no-ce)";
  return n;
}

void Variant::validate() const {
  if (sls && distill_mask) {
    require(tv, ErrorKind::Usage,
            "soft-label supervision uses the trust mask for distillation, which needs TV; add TV or "
            "request the unmasked distillation variant explicitly");
  }
  if (target != TargetKind::Mv) {
    require(!tv && !sls && !rcls, ErrorKind::Usage,
            std::string("the ") + to_string(target) + " baseline trains on fused soft targets only");
  }
  require(ce || sls || rcls, ErrorKind::Usage, "variant has no loss term left");
}

TrainingSet make_training_set(std::span<const Tensor* const> images,
                              std::span<const AnnotationStack* const> stacks, std::size_t classes,
                              std::size_t beta, TargetKind target) {
  require(!images.empty(), ErrorKind::Usage, "training set is empty");
  require(images.size() == stacks.size(), ErrorKind::Data,
          std::to_string(images.size()) + " images but " + std::to_string(stacks.size()) + " stacks");
  TrainingSet ts;
  ts.classes = classes;
  ts.images.assign(images.begin(), images.end());
  ts.stacks.assign(stacks.begin(), stacks.end());
  const std::size_t r = stacks[0]->raters();
  const std::size_t b = beta == 0 ? default_beta(r) : beta;
  for (std::size_t k = 0; k < images.size(); ++k) {
    require(stacks[k]->raters() == r, ErrorKind::Data, "stacks differ in rater count");
    require(images[k]->ndim() == 3 && images[k]->dim(1) == stacks[k]->height() &&
                images[k]->dim(2) == stacks[k]->width(),
            ErrorKind::Data, "image " + std::to_string(k) + " and its stack differ in extent");
    auto q = qmv_targets(*stacks[k], classes, b);
    ts.mv.push_back(std::move(q.labels));
    ts.masks.push_back(std::move(q.mask));
    if (target == TargetKind::Mean) {
      ts.soft_targets.push_back(mean_fusion(*stacks[k], classes).tensor());
    } else if (target == TargetKind::Staple) {
      require(classes == 2, ErrorKind::Configuration, "STAPLE targets are binary");
      ts.soft_targets.push_back(staple(*stacks[k]).posterior.tensor());
    }
  }
  return ts;
}

UNetConfig soft_label_config(const TrainConfig& config, std::size_t raters, std::size_t classes) {
  return {config.one_hot_stack ? raters * classes : raters, classes, config.channels};
}

UNetConfig seg_config(const TrainConfig& config, std::size_t image_channels, std::size_t classes) {
  return {image_channels, classes, config.channels};
}

std::size_t iterations_for(std::size_t epochs, std::size_t samples, std::size_t batch) {
  return epochs * ((samples + batch - 1) / batch);
}

namespace {

std::vector<std::size_t> sample_batch(Rng& rng, std::size_t m, std::size_t batch) {
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = rng.below(m);
  return idx;
}

std::vector<Tensor> gather_grads(const ad::Gradients& g, const ParamVars& vars) {
  std::vector<Tensor> out;
  out.reserve(vars.vars().size());
  for (const auto& v : vars.vars()) out.push_back(g[v]);
  return out;
}

Tensor slice_rows(const Tensor& all, std::span<const std::size_t> idx) {
  Shape s = all.shape();
  const std::size_t row = all.size() / s[0];
  s[0] = idx.size();
  Tensor out(s);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    std::copy_n(all.values().begin() + static_cast<std::ptrdiff_t>(idx[k] * row), row,
                out.data().begin() + static_cast<std::ptrdiff_t>(k * row));
  }
  return out;
}

Tensor stack_soft(const TrainingSet& d, std::span<const std::size_t> idx) {
  std::vector<const Tensor*> t;
  for (std::size_t i : idx) t.push_back(&d.soft_targets[i]);
  return batch_images(t);
}

void close_epoch(PhaseResult& res, std::size_t epoch, double loss_sum, std::size_t count) {
  res.epochs.push_back({epoch, count ? loss_sum / static_cast<double>(count) : 0.0, -1.0});
}

}  // namespace

PhaseResult train_phase1(const TrainingSet& data, const TrainConfig& config, bool masked,
                         const ParameterSet* init) {
  config.validate();
  require(data.size() > 0, ErrorKind::Usage, "phase 1 needs a nonempty training set");
  const std::size_t r = data.stacks[0]->raters();
  const UNetConfig net = soft_label_config(config, r, data.classes);
  PhaseResult res;
  res.params = init ? *init : build_unet(net, mix_seed(config.seed, 1), ParamRole::SoftLabel);
  AdamState adam = adam_init(res.params);
  Rng rng(mix_seed(config.seed, 11));
  const std::size_t m = data.size();
  const std::size_t per_epoch = iterations_for(1, m, config.batch);
  res.iterations = iterations_for(config.epochs_sll, m, config.batch);
  double epoch_sum = 0.0;
  std::size_t epoch_count = 0;
  for (std::size_t it = 0; it < res.iterations; ++it) {
    const auto idx = sample_batch(rng, m, config.batch);
    std::vector<const AnnotationStack*> stacks;
    std::vector<const LabelMap*> mv;
    std::vector<const TrustMask*> masks;
    for (std::size_t i : idx) {
      stacks.push_back(data.stacks[i]);
      mv.push_back(&data.mv[i]);
      if (masked) masks.push_back(&data.masks[i]);
    }
    ad::Graph g;
    const ParamVars vars(g, res.params, true);
    const ad::Var x = g.constant(encode_stacks(stacks, data.classes, config.one_hot_stack));
    const ad::Var p1 = ad::softmax_channel(forward_soft_label_net(net, vars, x), 1.0);
    const ad::Var loss = loss_sll(p1, mv, masks);
    const auto grads = g.backward(loss);
    adam_step(res.params, gather_grads(grads, vars), adam, config.lr);
    const std::size_t epoch = it / per_epoch;
    CurveRow row;
    row.iteration = it;
    row.epoch = epoch;
    row.l_sll = loss.value().item();
    res.curve.push_back(row);
    epoch_sum += row.l_sll;
    ++epoch_count;
    if ((it + 1) % per_epoch == 0 || it + 1 == res.iterations) {
      close_epoch(res, epoch, epoch_sum, epoch_count);
      epoch_sum = 0.0;
      epoch_count = 0;
    }
  }
  return res;
}

Tensor teacher_activations(const TrainingSet& data, const TrainConfig& config, const ParameterSet& teacher) {
  require(data.size() > 0, ErrorKind::Usage, "no stacks for the teacher");
  const std::size_t r = data.stacks[0]->raters();
  const UNetConfig net = soft_label_config(config, r, data.classes);
  const std::size_t h = data.stacks[0]->height(), w = data.stacks[0]->width();
  Tensor out(Shape{data.size(), data.classes, h, w});
  const std::size_t chunk = 32, row = data.classes * h * w;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t end = std::min(data.size(), start + chunk);
    std::vector<const AnnotationStack*> stacks(data.stacks.begin() + static_cast<std::ptrdiff_t>(start),
                                               data.stacks.begin() + static_cast<std::ptrdiff_t>(end));
    const Tensor a = predict_activations(net, teacher, encode_stacks(stacks, data.classes, config.one_hot_stack));
    std::copy(a.values().begin(), a.values().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(start * row));
  }
  return out;
}

PhaseResult train_phase2(const TrainingSet& data, const Tensor* teacher, const TrainConfig& config,
                         const Variant& variant, const Validation* validation) {
  config.validate();
  variant.validate();
  require(data.size() > 0, ErrorKind::Usage, "phase 2 needs a nonempty training set");
  require(!variant.sls || teacher != nullptr, ErrorKind::Usage,
          "soft-label supervision needs teacher activations");
  require(variant.target == TargetKind::Mv || data.soft_targets.size() == data.size(), ErrorKind::Usage,
          "soft-target baseline needs fused targets in the training set");
  const std::size_t r = data.stacks[0]->raters();
  const std::size_t image_channels = data.images[0]->dim(0);
  const UNetConfig net = seg_config(config, image_channels, data.classes);
  PhaseResult res;
  res.params = build_unet(net, mix_seed(config.seed, 2), ParamRole::Segmentation);
  const bool shared = config.rcn_backbone == RcnBackbone::Shared;
  if (variant.rcls) {
    res.rcn = shared ? build_rcn_heads(net, r, mix_seed(config.seed, 3))
                     : build_rcn(net, r, mix_seed(config.seed, 3));
  }
  AdamState adam_seg = adam_init(res.params);
  AdamState adam_rcn = adam_init(res.rcn);
  Rng rng(mix_seed(config.seed, 12));
  const std::size_t m = data.size();
  const std::size_t per_epoch = iterations_for(1, m, config.batch);
  res.iterations = iterations_for(config.epochs_seg, m, config.batch);
  const std::size_t rcn_iters = iterations_for(config.rcn_active_epochs, m, config.batch);
  double epoch_sum = 0.0;
  std::size_t epoch_count = 0;
  for (std::size_t it = 0; it < res.iterations; ++it) {
    const auto idx = sample_batch(rng, m, config.batch);
    std::vector<const Tensor*> images;
    std::vector<const AnnotationStack*> stacks;
    std::vector<const LabelMap*> mv;
    std::vector<const TrustMask*> masks;
    for (std::size_t i : idx) {
      images.push_back(data.images[i]);
      stacks.push_back(data.stacks[i]);
      mv.push_back(&data.mv[i]);
      masks.push_back(&data.masks[i]);
    }
    const std::span<const TrustMask* const> no_mask;
    const bool rcn_on = variant.rcls && it < rcn_iters;

    ad::Graph g;
    const ParamVars seg(g, res.params, true);
    std::optional<ParamVars> rcn;
    if (rcn_on) rcn.emplace(g, res.rcn, true);
    const ad::Var x = g.constant(batch_images(images));
    LossComponents parts;
    ad::Var a2;
    std::vector<ad::Var> heads;
    if (rcn_on && shared) {
      auto out = forward_seg_with_heads(net, seg, *rcn, x, r);
      a2 = out.segmentation;
      heads = std::move(out.heads);
    } else {
      a2 = forward_seg_net(net, seg, x);
      if (rcn_on) heads = forward_rcn(net, *rcn, x, r);
    }
    const ad::Var p2 = ad::softmax_channel(a2, 1.0);
    if (variant.ce) {
      if (variant.target == TargetKind::Mv) {
        parts.ce = loss_ce(p2, mv, variant.tv ? std::span<const TrustMask* const>(masks) : no_mask);
      } else {
        parts.ce = weighted_nll(p2, stack_soft(data, idx));
      }
    }
    if (variant.sls) {
      parts.sl = loss_sl(slice_rows(*teacher, idx), a2,
                         variant.distill_mask ? std::span<const TrustMask* const>(masks) : no_mask,
                         config.tau);
    }
    if (rcn_on) {
      std::vector<ad::Var> probs;
      for (const auto& h : heads) probs.push_back(ad::softmax_channel(h, 1.0));
      parts.rcl = loss_rcl(probs, stacks);
    }
    const ad::Var loss = loss_seg(g, parts, config.lambda);
    const auto grads = g.backward(loss);
    adam_step(res.params, gather_grads(grads, seg), adam_seg, config.lr);
    if (rcn_on) adam_step(res.rcn, gather_grads(grads, *rcn), adam_rcn, config.lr);

    const std::size_t epoch = it / per_epoch;
    CurveRow row;
    row.iteration = it;
    row.epoch = epoch;
    row.l_sl = parts.sl ? parts.sl->value().item() : 0.0;
    row.l_ce = parts.ce ? parts.ce->value().item() : 0.0;
    row.l_rcl = parts.rcl ? parts.rcl->value().item() : 0.0;
    row.l_seg = loss.value().item();
    res.curve.push_back(row);
    epoch_sum += row.l_seg;
    ++epoch_count;
    if ((it + 1) % per_epoch == 0 || it + 1 == res.iterations) {
      close_epoch(res, epoch, epoch_sum, epoch_count);
      epoch_sum = 0.0;
      epoch_count = 0;
      if (validation && !validation->images.empty()) {
        const auto pred = predict_labels(net, res.params, validation->images);
        double total = 0.0;
        for (std::size_t k = 0; k < pred.size(); ++k) total += dsc(pred[k], *validation->gt[k], 1);
        res.epochs.back().val_dsc = total / static_cast<double>(pred.size());
      }
    }
  }
  return res;
}

std::vector<ProbabilityMap> predict_probabilities(const UNetConfig& config, const ParameterSet& params,
                                                  std::span<const Tensor* const> images, std::size_t batch) {
  std::vector<ProbabilityMap> out;
  for (std::size_t start = 0; start < images.size(); start += batch) {
    const std::size_t end = std::min(images.size(), start + batch);
    const Tensor a = predict_activations(config, params, batch_images(images.subspan(start, end - start)));
    const Tensor p = ad::softmax_channel(a, 1.0);
    const std::size_t row = p.size() / p.dim(0);
    for (std::size_t k = 0; k < end - start; ++k) {
      std::vector<double> v(p.values().begin() + static_cast<std::ptrdiff_t>(k * row),
                            p.values().begin() + static_cast<std::ptrdiff_t>((k + 1) * row));
      out.emplace_back(Tensor(Shape{p.dim(1), p.dim(2), p.dim(3)}, std::move(v)));
    }
  }
  return out;
}

std::vector<LabelMap> predict_labels(const UNetConfig& config, const ParameterSet& params,
                                     std::span<const Tensor* const> images, std::size_t batch) {
  std::vector<LabelMap> out;
  for (const auto& p : predict_probabilities(config, params, images, batch)) out.push_back(p.argmax());
  return out;
}

std::string curve_csv(std::span<const CurveRow> rows) {
  std::ostringstream os;
  os << "iteration,epoch,l_sll,l_sl,l_ce,l_rcl,l_seg\n";
  for (const auto& r : rows) {
    os << r.iteration << ',' << r.epoch << ',' << format_double(r.l_sll) << ',' << format_double(r.l_sl)
       << ',' << format_double(r.l_ce) << ',' << format_double(r.l_rcl) << ',' << format_double(r.l_seg)
       << '\n';
  }
  return os.str();
}

std::string epoch_csv(std::span<const EpochRow> rows) {
  std::ostringstream os;
  os << "epoch,mean_loss,val_dsc\n";
  for (const auto& r : rows) {
    os << r.epoch << ',' << format_double(r.mean_loss) << ',';
    if (r.val_dsc >= 0.0) os << format_double(r.val_dsc);
    os << '\n';
  }
  return os.str();
}

}  // namespace labelfill
