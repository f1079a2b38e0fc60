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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labelfill/labels.hpp"
#include "labelfill/nets.hpp"

namespace labelfill {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

AdamState adam_init(const ParameterSet& params);
// grads are aligned with params.entries(). Throws Numeric naming the key on a
// non-finite gradient, before any parameter is touched.
void adam_step(ParameterSet& params, std::span<const Tensor> grads, AdamState& state, double lr);

enum class RcnBackbone { Separate, Shared };
enum class TargetKind { Mv, Mean, Staple };

const char* to_string(RcnBackbone b);
RcnBackbone parse_rcn_backbone(const std::string& name);
const char* to_string(TargetKind t);
TargetKind parse_target_kind(const std::string& name);

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch = 8;
  double tau = 2.5;
  double lambda = 0.01;
  std::size_t beta = 0;  // 0 selects R - 1
  std::size_t epochs_sll = 10;
  std::size_t epochs_seg = 10;
  std::size_t rcn_active_epochs = 15;
  std::vector<std::size_t> channels{8, 16, 32};
  bool one_hot_stack = false;
  RcnBackbone rcn_backbone = RcnBackbone::Separate;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Component switches of the segmentation objective.
struct Variant {
  bool tv = false;    // trust mask on the CE term
  bool sls = false;   // soft-label supervision from a phase-1 teacher
  bool rcls = false;  // rater characteristics heads
  bool ce = true;
  bool distill_mask = true;  // trust mask on the teacher and on L_sl
  TargetKind target = TargetKind::Mv;

  // "mv", "qmv", "lfnet", "mean", "staple", or '+'-joined S/TV/SLS/RCLS.
  static Variant parse(const std::string& name);
  std::string name() const;
  void validate() const;
  bool operator==(const Variant&) const = default;
};

struct TrainingSet {
  std::size_t classes = 2;
  std::vector<const Tensor*> images;           // [1,H,W]
  std::vector<const AnnotationStack*> stacks;
  std::vector<LabelMap> mv;
  std::vector<TrustMask> masks;
  std::vector<Tensor> soft_targets;  // [L,H,W], for mean or staple targets

  std::size_t size() const { return images.size(); }
};

TrainingSet make_training_set(std::span<const Tensor* const> images,
                              std::span<const AnnotationStack* const> stacks, std::size_t classes,
                              std::size_t beta, TargetKind target = TargetKind::Mv);

struct CurveRow {
  std::size_t iteration = 0;
  std::size_t epoch = 0;
  double l_sll = 0.0;
  double l_sl = 0.0;
  double l_ce = 0.0;
  double l_rcl = 0.0;
  double l_seg = 0.0;
};

struct EpochRow {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double val_dsc = -1.0;  // negative when no validation set
};

struct PhaseResult {
  ParameterSet params;      // Θ¹ for phase 1, Θ² for phase 2
  ParameterSet rcn;         // trained heads (and backbone); unused at test time
  std::vector<CurveRow> curve;
  std::vector<EpochRow> epochs;
  std::size_t iterations = 0;
};

UNetConfig soft_label_config(const TrainConfig& config, std::size_t raters, std::size_t classes);
UNetConfig seg_config(const TrainConfig& config, std::size_t image_channels, std::size_t classes);

std::size_t iterations_for(std::size_t epochs, std::size_t samples, std::size_t batch);

// Minimizes the masked majority-vote loss on the raw stacks.
PhaseResult train_phase1(const TrainingSet& data, const TrainConfig& config, bool masked = true,
                         const ParameterSet* init = nullptr);

// Teacher activations [M,L,H,W] for every training stack.
Tensor teacher_activations(const TrainingSet& data, const TrainConfig& config, const ParameterSet& teacher);

struct Validation {
  std::vector<const Tensor*> images;
  std::vector<const LabelMap*> gt;
};

PhaseResult train_phase2(const TrainingSet& data, const Tensor* teacher, const TrainConfig& config,
                         const Variant& variant, const Validation* validation = nullptr);

// Argmax label maps for each image, batched.
std::vector<LabelMap> predict_labels(const UNetConfig& config, const ParameterSet& params,
                                     std::span<const Tensor* const> images, std::size_t batch = 32);
std::vector<ProbabilityMap> predict_probabilities(const UNetConfig& config, const ParameterSet& params,
                                                  std::span<const Tensor* const> images,
                                                  std::size_t batch = 32);

std::string curve_csv(std::span<const CurveRow> rows);
std::string epoch_csv(std::span<const EpochRow> rows);

}  // namespace labelfill
