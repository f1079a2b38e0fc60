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
#include <filesystem>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "gradcheck.hpp"
#include "labelfill/losses.hpp"
#include "labelfill/nets.hpp"
#include "labelfill/rater_sim.hpp"
#include "labelfill/training.hpp"
#include "support.hpp"

using namespace labelfill;
using labelfill::testing::kind_of;
using labelfill::testing::message_of;
using labelfill::testing::random_binary_map;
using labelfill::testing::random_tensor;

namespace {

const double kLn2 = std::numbers::ln2;

UNetConfig small_config(std::size_t in = 1) {
  UNetConfig c;
  c.in_channels = in;
  c.channels = {4, 8};
  return c;
}

// One [1,L,1,1] probability tensor.
Tensor pixel_probs(std::initializer_list<double> p) {
  return Tensor(Shape{1, p.size(), 1, 1}, std::vector<double>(p));
}

struct Toy {
  std::vector<Tensor> images;
  std::vector<LabelMap> gt;
  std::vector<AnnotationStack> stacks;
  std::vector<const Tensor*> image_ptrs;
  std::vector<const AnnotationStack*> stack_ptrs;
  TrainingSet set;
};

// Blocky foreground squares on an 8x8 grid with three simulated raters.
Toy make_toy(std::size_t n, std::uint64_t seed) {
  Toy t;
  Rng rng(seed);
  std::vector<RaterProfile> profiles{{RaterKind::Good, 1, 1}, {RaterKind::Over, 1, 2}, {RaterKind::Under, 1, 3}};
  for (std::size_t k = 0; k < n; ++k) {
    LabelMap g(8, 8);
    const std::size_t r0 = rng.below(4), c0 = rng.below(4);
    for (std::size_t i = r0; i < r0 + 4; ++i)
      for (std::size_t j = c0; j < c0 + 4; ++j) g(i, j) = 1;
    Tensor img(Shape{1, 8, 8});
    for (std::size_t p = 0; p < 64; ++p) img[p] = g[p] ? 0.9 : 0.1;
    t.images.push_back(img);
    t.gt.push_back(g);
    t.stacks.push_back(simulate_stack(g, profiles, k));
  }
  for (std::size_t k = 0; k < n; ++k) {
    t.image_ptrs.push_back(&t.images[k]);
    t.stack_ptrs.push_back(&t.stacks[k]);
  }
  t.set = make_training_set(t.image_ptrs, t.stack_ptrs, 2, 2);
  return t;
}

TrainConfig toy_train_config() {
  TrainConfig c;
  c.channels = {4, 8};
  c.batch = 4;
  c.lr = 1e-2;
  c.epochs_sll = 2;
  c.epochs_seg = 2;
  c.rcn_active_epochs = 1;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("U-Net parameter layout and initialization") {
  const UNetConfig c = small_config();
  const ParameterSet p = build_unet(c, 5);
  CHECK(p.parameter_count() == 1662);
  CHECK(p.contains("enc0.conv0.weight"));
  CHECK(p.contains("bottleneck.conv1.bias"));
  CHECK(p.contains("dec0.conv0.weight"));
  CHECK(p.value("dec0.conv0.weight").shape() == Shape{4, 12, 3, 3});
  CHECK(p.value("out.weight").shape() == Shape{2, 4, 1, 1});
  CHECK(p == build_unet(c, 5));
  CHECK_FALSE(p == build_unet(c, 6));

  const Tensor& w = p.value("enc0.conv0.weight");
  const double bound = std::sqrt(6.0 / 9.0);
  for (double v : w.data()) CHECK(std::abs(v) <= bound);
  for (double v : p.value("enc0.conv0.bias").data()) CHECK(v == 0.0);

  const ParameterSet pre = build_unet(c, 5, ParamRole::SoftLabel, "sll.");
  CHECK(pre.contains("sll.out.weight"));
  CHECK(pre.entry(0).role == ParamRole::SoftLabel);
  CHECK(kind_of([&] { (void)p.index_of("missing"); }) == ErrorKind::Integrity);
  CHECK(kind_of([&] { ParameterSet q = p; q.set("out.bias", Tensor(Shape{3})); }) == ErrorKind::Dimension);
}

TEST_CASE("configuration checks") {
  UNetConfig c;
  CHECK_NOTHROW(c.check_extent(28, 28));
  CHECK(kind_of([&] { c.check_extent(30, 28); }) == ErrorKind::Configuration);
  c.channels = {8};
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::Configuration);
  CHECK(parse_param_role("rcn_head") == ParamRole::RcnHead);
  CHECK(parse_param_role(to_string(ParamRole::SoftLabel)) == ParamRole::SoftLabel);
}

TEST_CASE("forward shapes and gradient reachability") {
  const UNetConfig c = small_config();
  const ParameterSet p = build_unet(c, 9);
  Rng rng(1);
  ad::Graph g;
  const ParamVars pv(g, p, true);
  const ad::Var x = g.constant(random_tensor(Shape{2, 1, 8, 8}, rng, 0.0, 1.0));
  const ad::Var a = forward_seg_net(c, pv, x);
  CHECK(a.shape() == Shape{2, 2, 8, 8});
  const ad::Var probs = ad::softmax_channel(a, 1.0);
  const Tensor weights = random_tensor(Shape{2, 2, 8, 8}, rng, 0.0, 1.0);
  const auto grads = g.backward(weighted_nll(probs, weights));
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Tensor& gr = grads[pv.vars()[i]];
    double norm = 0.0;
    for (double v : gr.data()) norm += v * v;
    CHECK_MESSAGE(norm > 0.0, p.entry(i).key);
  }

  const Tensor direct = predict_activations(c, p, x.value());
  CHECK(direct == a.value());
}

TEST_CASE("rater heads are isolated from one another") {
  const UNetConfig c = small_config();
  const ParameterSet rcn = build_rcn(c, 3, 4);
  CHECK(rcn.contains("rcn.enc0.conv0.weight"));
  CHECK(rcn.contains("rcn.head2.out.weight"));
  CHECK_FALSE(rcn.contains("rcn.out.weight"));
  Rng rng(2);
  ad::Graph g;
  const ParamVars pv(g, rcn, true);
  const ad::Var x = g.constant(random_tensor(Shape{1, 1, 8, 8}, rng, 0.0, 1.0));
  const auto heads = forward_rcn(c, pv, x, 3);
  REQUIRE(heads.size() == 3);
  CHECK(heads[0].shape() == Shape{1, 2, 8, 8});
  CHECK_FALSE(heads[0].value() == heads[1].value());
  const auto grads = g.backward(ad::sum(heads[1]));
  for (std::size_t i = 0; i < rcn.size(); ++i) {
    const ParamEntry& e = rcn.entry(i);
    if (e.role != ParamRole::RcnHead || e.head == 1) continue;
    for (double v : grads[pv.vars()[i]].data()) CHECK(v == 0.0);
  }
  CHECK(kind_of([&] { (void)forward_rcn(c, pv, x, 2); }) == ErrorKind::Configuration);

  const ParameterSet single = build_rcn(c, 1, 4);
  ad::Graph g1;
  const ParamVars pv1(g1, single, true);
  CHECK(forward_rcn(c, pv1, g1.constant(x.value()), 1).size() == 1);

  const ParameterSet seg = build_unet(c, 8);
  const ParameterSet shared_heads = build_rcn_heads(c, 2, 4);
  CHECK_FALSE(shared_heads.contains("rcn.enc0.conv0.weight"));
  ad::Graph g2;
  const ParamVars spv(g2, seg, true), hpv(g2, shared_heads, true);
  const RcnOutputs out = forward_seg_with_heads(c, spv, hpv, g2.constant(x.value()), 2);
  CHECK(out.heads.size() == 2);
  CHECK(out.segmentation.value() == predict_activations(c, seg, x.value()));
}

TEST_CASE("stack encodings") {
  const AnnotationStack s({LabelMap(2, 2, std::vector<std::uint8_t>{0, 1, 2, 1}),
                           LabelMap(2, 2, std::vector<std::uint8_t>{2, 2, 0, 0})});
  const Tensor scalar = encode_stack(s, 3);
  CHECK(scalar.shape() == Shape{1, 2, 2, 2});
  CHECK(scalar[1] == doctest::Approx(0.5));
  CHECK(scalar[4] == doctest::Approx(1.0));
  const Tensor hot = encode_stack(s, 3, true);
  CHECK(hot.shape() == Shape{1, 6, 2, 2});
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t p = 0; p < 4; ++p) {
      double total = 0.0;
      for (std::size_t l = 0; l < 3; ++l) total += hot[(r * 3 + l) * 4 + p];
      CHECK(total == 1.0);
      CHECK(hot[(r * 3 + s[r][p]) * 4 + p] == 1.0);
    }
  std::vector<const AnnotationStack*> ptrs{&s, &s};
  CHECK(encode_stacks(ptrs, 3).shape() == Shape{2, 2, 2, 2});
}

TEST_CASE("checkpoints round-trip bit for bit") {
  const auto dir = std::filesystem::temp_directory_path() / "labelfill_ckpt_test";
  std::filesystem::remove_all(dir);
  ParameterSet p = build_unet(small_config(), 11);
  p.merge(build_rcn_heads(small_config(), 2, 12));
  save_checkpoint(dir, p, R"({"variant":"S"})");
  const ParameterSet back = load_checkpoint(dir);
  CHECK(back == p);
  CHECK_NOTHROW(require_same_layout(back, p));
  CHECK(kind_of([&] { require_same_layout(build_unet(small_config(), 1), p); }) == ErrorKind::Integrity);
  CHECK(kind_of([&] { (void)load_checkpoint(dir / "absent"); }) == ErrorKind::Io);
  std::filesystem::remove_all(dir);
}

TEST_CASE("masked NLL closed forms") {
  ad::Graph g;
  const LabelMap one(1, 1, 1);
  const TrustMask on = TrustMask::all(1, 1);
  std::vector<const LabelMap*> mv{&one};
  std::vector<const TrustMask*> masks{&on};
  CHECK(loss_sll(g.constant(pixel_probs({0.5, 0.5})), mv, masks).value().item() == doctest::Approx(kLn2));
  CHECK(loss_ce(g.constant(pixel_probs({0.0, 1.0})), mv, masks).value().item() == 0.0);
  const TrustMask off(LabelMap(1, 1, 0));
  std::vector<const TrustMask*> off_masks{&off};
  CHECK(loss_sll(g.constant(pixel_probs({0.9, 0.1})), mv, off_masks).value().item() == 0.0);
  const double clamped = loss_sll(g.constant(pixel_probs({1.0, 0.0})), mv, masks).value().item();
  CHECK(clamped == doctest::Approx(-std::log(kProbFloor)));
  CHECK(kind_of([&] { (void)loss_sll(g.constant(Tensor(Shape{1, 2, 2, 1}, 0.5)), mv, masks); }) ==
        ErrorKind::Dimension);
}

TEST_CASE("losses are mask-local in value and gradient") {
  Rng rng(5);
  const std::size_t h = 5, w = 6;
  const LabelMap mv = random_binary_map(h, w, rng);
  const TrustMask mask(random_binary_map(h, w, rng, 0.6));
  LabelMap mv_changed = mv;
  for (std::size_t p = 0; p < mv.size(); ++p)
    if (!mask[p]) mv_changed[p] = 1 - mv_changed[p];
  const Tensor student = random_tensor(Shape{1, 2, h, w}, rng, -2.0, 2.0);
  const Tensor teacher = random_tensor(Shape{1, 2, h, w}, rng, -2.0, 2.0);
  Tensor teacher_changed = teacher;
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t p = 0; p < h * w; ++p)
      if (!mask[p]) teacher_changed[l * h * w + p] = rng.uniform(-5.0, 5.0);
  std::vector<const TrustMask*> masks{&mask};

  auto evaluate = [&](const LabelMap& labels, const Tensor& t) {
    ad::Graph g;
    const ad::Var s = g.leaf(student);
    std::vector<const LabelMap*> mvp{&labels};
    const ad::Var total = ad::add(loss_ce(ad::softmax_channel(s, 1.0), mvp, masks), loss_sl(t, s, masks, 2.5));
    return std::pair{total.value().item(), g.backward(total)[s]};
  };
  const auto [v0, g0] = evaluate(mv, teacher);
  const auto [v1, g1] = evaluate(mv_changed, teacher_changed);
  CHECK(v0 == v1);
  CHECK(g0 == g1);
}

TEST_CASE("soft-label supervision") {
  ad::Graph g;
  const TrustMask on = TrustMask::all(1, 1);
  std::vector<const TrustMask*> masks{&on};
  const Tensor a = pixel_probs({0.3, 0.3});
  CHECK(loss_sl(a, g.leaf(a), masks, 2.5).value().item() == doctest::Approx(6.25 * kLn2));
  const TrustMask off(LabelMap(1, 1, 0));
  std::vector<const TrustMask*> off_masks{&off};
  CHECK(loss_sl(pixel_probs({2.0, -1.0}), g.leaf(a), off_masks, 2.5).value().item() == 0.0);
  CHECK(kind_of([&] { (void)loss_sl(a, g.leaf(a), masks, 0.0); }) == ErrorKind::Usage);

  Rng rng(8);
  const Tensor t = random_tensor(Shape{1, 3, 2, 2}, rng, -2.0, 2.0);
  const Tensor s = random_tensor(Shape{1, 3, 2, 2}, rng, -2.0, 2.0);
  const Tensor q1 = ad::softmax_channel(t, 1.0), q2 = ad::softmax_channel(s, 1.0);
  double expected = 0.0;
  for (std::size_t k = 0; k < q1.size(); ++k) expected -= q1[k] * std::log(q2[k]);
  CHECK(loss_sl(t, g.leaf(s), {}, 1.0).value().item() == doctest::Approx(expected).epsilon(1e-12));

  ad::Graph g2;
  const ad::Var teacher = g2.leaf(t);
  const ad::Var student = g2.leaf(s);
  const auto grads = g2.backward(loss_sl(teacher, student, {}, 2.5));
  for (double v : grads[teacher].data()) CHECK(v == 0.0);
  double norm = 0.0;
  for (double v : grads[student].data()) norm += std::abs(v);
  CHECK(norm > 0.0);

  const auto check = testing::grad_check(
      [&](ad::Graph&, const std::vector<ad::Var>& in) { return loss_sl(t, in[0], {}, 2.5); }, {s});
  CHECK(check.max_error < 1e-6);
}

TEST_CASE("rater characteristics loss") {
  ad::Graph g;
  const AnnotationStack s({LabelMap(1, 1, 0), LabelMap(1, 1, 1), LabelMap(1, 1, 1)});
  std::vector<const AnnotationStack*> stacks{&s};
  std::vector<ad::Var> uniform(3, g.constant(pixel_probs({0.5, 0.5})));
  CHECK(loss_rcl(uniform, stacks).value().item() == doctest::Approx(3 * kLn2));
  std::vector<ad::Var> perfect{g.constant(pixel_probs({1.0, 0.0})), g.constant(pixel_probs({0.0, 1.0})),
                               g.constant(pixel_probs({0.0, 1.0}))};
  CHECK(loss_rcl(perfect, stacks).value().item() == 0.0);
  std::vector<ad::Var> two(uniform.begin(), uniform.begin() + 2);
  CHECK(kind_of([&] { (void)loss_rcl(two, stacks); }) == ErrorKind::Configuration);

  Rng rng(12);
  std::vector<LabelMap> maps;
  std::vector<ad::Var> heads;
  for (int r = 0; r < 4; ++r) {
    maps.push_back(random_binary_map(3, 4, rng));
    heads.push_back(ad::softmax_channel(g.constant(random_tensor(Shape{1, 2, 3, 4}, rng)), 1.0));
  }
  const AnnotationStack forward(maps);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<LabelMap> pmaps;
  std::vector<ad::Var> pheads;
  for (std::size_t k : perm) {
    pmaps.push_back(maps[k]);
    pheads.push_back(heads[k]);
  }
  const AnnotationStack permuted(pmaps);
  std::vector<const AnnotationStack*> fs{&forward}, ps{&permuted};
  CHECK(loss_rcl(heads, fs).value().item() == doctest::Approx(loss_rcl(pheads, ps).value().item()).epsilon(1e-14));
}

TEST_CASE("combined loss, gradient partition and finite differences") {
  const UNetConfig c = small_config();
  const ParameterSet seg = build_unet(c, 21);
  const ParameterSet rcn = build_rcn(c, 2, 22);
  Rng rng(4);
  const Tensor image = random_tensor(Shape{1, 1, 8, 8}, rng, 0.0, 1.0);
  const Tensor teacher = random_tensor(Shape{1, 2, 8, 8}, rng, -2.0, 2.0);
  const LabelMap mv = random_binary_map(8, 8, rng);
  const TrustMask mask(random_binary_map(8, 8, rng, 0.7));
  const AnnotationStack stack({random_binary_map(8, 8, rng), random_binary_map(8, 8, rng)});
  std::vector<const LabelMap*> mvp{&mv};
  std::vector<const TrustMask*> masks{&mask};
  std::vector<const AnnotationStack*> stacks{&stack};
  const double lambda = 0.3;

  struct Eval {
    double sl, ce, rcl, total;
  };
  auto run = [&](const ParameterSet& s, const ParameterSet& r, double lam, std::vector<Tensor>* gs, std::vector<Tensor>* gr,
                 int part) {
    ad::Graph g;
    const ParamVars spv(g, s, true), rpv(g, r, true);
    const ad::Var x = g.constant(image);
    const ad::Var a = forward_seg_net(c, spv, x);
    const ad::Var sl = loss_sl(teacher, a, masks, 2.5);
    const ad::Var ce = loss_ce(ad::softmax_channel(a, 1.0), mvp, masks);
    std::vector<ad::Var> hp;
    for (const ad::Var& h : forward_rcn(c, rpv, x, 2)) hp.push_back(ad::softmax_channel(h, 1.0));
    const ad::Var rcl = loss_rcl(hp, stacks);
    LossComponents parts{sl, ce, rcl};
    const ad::Var total = loss_seg(g, parts, lam);
    const ad::Var root = part == 0 ? total : part == 1 ? ad::add(sl, ce) : rcl;
    if (gs || gr) {
      const auto grads = g.backward(root);
      std::vector<Tensor> vs, vr;
      for (const auto& v : spv.vars()) vs.push_back(grads[v]);
      for (const auto& v : rpv.vars()) vr.push_back(grads[v]);
      if (gs) *gs = std::move(vs);
      if (gr) *gr = std::move(vr);
    }
    return Eval{sl.value().item(), ce.value().item(), rcl.value().item(), total.value().item()};
  };

  std::vector<Tensor> total_s, total_r, data_s, rcl_r;
  const Eval e = run(seg, rcn, lambda, &total_s, &total_r, 0);
  CHECK(e.total == doctest::Approx(e.sl + e.ce + lambda * e.rcl).epsilon(1e-14));
  CHECK(run(seg, rcn, 0.0, nullptr, nullptr, 0).total == e.sl + e.ce);
  run(seg, rcn, lambda, &data_s, nullptr, 1);
  run(seg, rcn, lambda, nullptr, &rcl_r, 2);
  for (std::size_t i = 0; i < seg.size(); ++i) {
    for (std::size_t k = 0; k < total_s[i].size(); ++k)
      CHECK(total_s[i][k] == doctest::Approx(data_s[i][k]).epsilon(1e-12));
  }
  for (std::size_t i = 0; i < rcn.size(); ++i) {
    for (std::size_t k = 0; k < total_r[i].size(); ++k)
      CHECK(total_r[i][k] == doctest::Approx(lambda * rcl_r[i][k]).epsilon(1e-12));
  }

  ad::Graph empty;
  CHECK(loss_seg(empty, {}, 0.5).value().item() == 0.0);

  const double step = 1e-5;
  double worst = 0.0;
  Rng pick(99);
  for (int t = 0; t < 100; ++t) {
    const bool on_seg = pick.below(2) == 0;
    const ParameterSet& base = on_seg ? seg : rcn;
    const std::size_t i = pick.below(base.size());
    const std::size_t k = pick.below(base.entry(i).value.size());
    ParameterSet plus = base, minus = base;
    plus.mutable_value(i)[k] += step;
    minus.mutable_value(i)[k] -= step;
    const double fp = on_seg ? run(plus, rcn, lambda, nullptr, nullptr, 0).total
                             : run(seg, plus, lambda, nullptr, nullptr, 0).total;
    const double fm = on_seg ? run(minus, rcn, lambda, nullptr, nullptr, 0).total
                             : run(seg, minus, lambda, nullptr, nullptr, 0).total;
    const double numeric = (fp - fm) / (2 * step);
    const double analytic = on_seg ? total_s[i][k] : total_r[i][k];
    worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric)));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("Adam steps") {
  ParameterSet p;
  p.add("w", ParamRole::Segmentation, Tensor(Shape{2}, std::vector<double>{1.0, -3.0}));
  AdamState s = adam_init(p);
  std::vector<Tensor> zero{Tensor(Shape{2})};
  adam_step(p, zero, s, 1e-4);
  CHECK(s.step == 1);
  CHECK(p.value("w") == Tensor(Shape{2}, std::vector<double>{1.0, -3.0}));

  AdamState fresh = adam_init(p);
  std::vector<Tensor> g{Tensor(Shape{2}, std::vector<double>{2.0, -2.0})};
  adam_step(p, g, fresh, 1e-4);
  CHECK(p.value("w")[0] == doctest::Approx(1.0 - 1e-4).epsilon(1e-12));
  CHECK(p.value("w")[1] == doctest::Approx(-3.0 + 1e-4).epsilon(1e-12));

  ParameterSet q;
  q.add("w", ParamRole::Segmentation, Tensor(Shape{2}, std::vector<double>{1.0, -3.0}));
  AdamState qs = adam_init(q);
  adam_step(q, g, qs, 1e-4);
  CHECK(q == p);

  std::vector<Tensor> bad{Tensor(Shape{2}, std::vector<double>{0.0, std::numeric_limits<double>::quiet_NaN()})};
  const ParameterSet before = p;
  const std::string msg = message_of([&] { adam_step(p, bad, fresh, 1e-4); });
  CHECK(msg.find("'w'") != std::string::npos);
  CHECK(kind_of([&] { adam_step(p, bad, fresh, 1e-4); }) == ErrorKind::Numeric);
  CHECK(p == before);
}

TEST_CASE("variant grammar") {
  CHECK(Variant::parse("lfnet") == Variant::parse("S+TV+SLS+RCLS"));
  CHECK(Variant::parse("qmv").name() == "S+TV");
  CHECK(Variant::parse("mv").name() == "S");
  CHECK(Variant::parse("staple").target == TargetKind::Staple);
  CHECK(kind_of([] { (void)Variant::parse("S+XX"); }) == ErrorKind::Usage);
  CHECK(kind_of([] { (void)Variant::parse("TV"); }) == ErrorKind::Usage);
  CHECK(kind_of([] { Variant::parse("S+SLS").validate(); }) == ErrorKind::Usage);
  Variant loose = Variant::parse("S+SLS");
  loose.distill_mask = false;
  CHECK_NOTHROW(loose.validate());
  CHECK(loose.name() == "S+SLS(no-tv-distill)");
  Variant none;
  none.ce = false;
  CHECK(kind_of([&] { none.validate(); }) == ErrorKind::Usage);
  CHECK(iterations_for(10, 1000, 8) == 1250);
  CHECK(iterations_for(1, 7, 2) == 4);
  TrainConfig tc;
  tc.tau = 0.0;
  CHECK(kind_of([&] { tc.validate(); }) == ErrorKind::Usage);
}

TEST_CASE("phase 1 training") {
  Toy toy = make_toy(16, 1);
  TrainConfig c = toy_train_config();
  c.epochs_sll = 0;
  const PhaseResult none = train_phase1(toy.set, c);
  CHECK(none.iterations == 0);
  CHECK(none.params == build_unet(soft_label_config(c, 3, 2), mix_seed(c.seed, 1), ParamRole::SoftLabel));

  c.epochs_sll = 6;
  const PhaseResult a = train_phase1(toy.set, c);
  const PhaseResult b = train_phase1(toy.set, c);
  CHECK(a.iterations == 24);
  CHECK(a.curve.size() == 24);
  CHECK(a.params == b.params);
  REQUIRE(a.epochs.size() == 6);
  CHECK(a.epochs.back().mean_loss < a.epochs.front().mean_loss);

  const Tensor t = teacher_activations(toy.set, c, a.params);
  CHECK(t.shape() == Shape{16, 2, 8, 8});
  CHECK(curve_csv(a.curve).rfind("iteration,epoch,l_sll,l_sl,l_ce,l_rcl,l_seg\n", 0) == 0);
  TrainingSet empty;
  CHECK(kind_of([&] { (void)train_phase1(empty, c); }) == ErrorKind::Usage);
}

TEST_CASE("phase 2 ablation matrix") {
  Toy toy = make_toy(16, 2);
  TrainConfig c = toy_train_config();
  c.lambda = 0.05;
  const Tensor teacher = teacher_activations(toy.set, c, train_phase1(toy.set, c).params);
  std::vector<const LabelMap*> gt;
  for (const auto& m : toy.gt) gt.push_back(&m);
  const Validation val{toy.image_ptrs, gt};
  for (const char* name : {"S", "S+TV", "S+TV+SLS", "S+TV+RCLS", "lfnet"}) {
    const Variant v = Variant::parse(name);
    const PhaseResult r = train_phase2(toy.set, &teacher, c, v, &val);
    CAPTURE(name);
    CHECK(r.iterations == 8);
    CHECK(r.params.parameter_count() == 1662);
    CHECK(r.params.entry(0).role == ParamRole::Segmentation);
    CHECK((r.rcn.size() > 0) == v.rcls);
    REQUIRE(r.epochs.size() == 2);
    CHECK(r.epochs[0].val_dsc >= 0.0);
    for (const CurveRow& row : r.curve) {
      const double expected = row.l_sl + row.l_ce + c.lambda * row.l_rcl;
      CHECK(row.l_seg == doctest::Approx(expected));
      if (!v.rcls) CHECK(row.l_rcl == 0.0);
    }
    const PhaseResult again = train_phase2(toy.set, &teacher, c, v, &val);
    CHECK(again.params == r.params);
  }

  Variant no_ce = Variant::parse("S+TV+SLS");
  no_ce.ce = false;
  const PhaseResult nc = train_phase2(toy.set, &teacher, c, no_ce);
  for (const CurveRow& row : nc.curve) CHECK(row.l_ce == 0.0);

  c.rcn_backbone = RcnBackbone::Shared;
  const PhaseResult shared = train_phase2(toy.set, &teacher, c, Variant::parse("lfnet"));
  CHECK_FALSE(shared.rcn.contains("rcn.enc0.conv0.weight"));
  CHECK(shared.rcn.contains("rcn.head2.out.weight"));

  CHECK(kind_of([&] { (void)train_phase2(toy.set, nullptr, c, Variant::parse("S+TV+SLS")); }) == ErrorKind::Usage);
  const auto labels = predict_labels(seg_config(c, 1, 2), shared.params, toy.image_ptrs);
  CHECK(labels.size() == 16);
  CHECK(labels[0].height() == 8);
}

TEST_CASE("phase 2 reduces the training loss") {
  Toy toy = make_toy(32, 3);
  TrainConfig c = toy_train_config();
  c.epochs_seg = 8;
  const PhaseResult r = train_phase2(toy.set, nullptr, c, Variant::parse("S+TV"));
  CHECK(r.epochs.back().mean_loss < r.epochs.front().mean_loss);
}
