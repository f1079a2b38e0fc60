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
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "labelfill/autodiff.hpp"
#include "labelfill/labels.hpp"
#include "labelfill/tensor.hpp"

namespace labelfill {

struct UNetConfig {
  std::size_t in_channels = 1;
  std::size_t classes = 2;
  std::vector<std::size_t> channels{8, 16, 32};  // last entry is the bottleneck

  std::size_t depth() const { return channels.size(); }
  void validate() const;
  // Configuration error unless H and W are divisible by 2^(depth-1).
  void check_extent(std::size_t height, std::size_t width) const;

  bool operator==(const UNetConfig&) const = default;
};

enum class ParamRole { SoftLabel, Segmentation, RcnBackbone, RcnHead };

const char* to_string(ParamRole role);
ParamRole parse_param_role(const std::string& name);

struct ParamEntry {
  std::string key;
  ParamRole role = ParamRole::Segmentation;
  int head = -1;  // rater index for RcnHead entries
  Tensor value;

  bool operator==(const ParamEntry&) const = default;
};

// Named tensors in construction order. Keys and shapes are fixed once added.
class ParameterSet {
 public:
  void add(std::string key, ParamRole role, Tensor value, int head = -1);

  std::size_t size() const noexcept { return entries_.size(); }
  const ParamEntry& entry(std::size_t i) const { return entries_.at(i); }
  const std::vector<ParamEntry>& entries() const noexcept { return entries_; }

  bool contains(const std::string& key) const { return index_.count(key) != 0; }
  std::size_t index_of(const std::string& key) const;  // Integrity error if absent
  const Tensor& value(const std::string& key) const { return entries_[index_of(key)].value; }
  Tensor& mutable_value(std::size_t i) { return entries_.at(i).value; }
  // Replaces a value; the shape must match.
  void set(const std::string& key, Tensor value);

  std::size_t parameter_count() const;
  std::vector<std::string> keys() const;

  // Appends every entry of `other`; keys must not collide.
  void merge(const ParameterSet& other);

  bool operator==(const ParameterSet& other) const { return entries_ == other.entries_; }

 private:
  std::vector<ParamEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

// He-style uniform weights U(-sqrt(6/fan_in), +sqrt(6/fan_in)), zero biases.
ParameterSet build_unet(const UNetConfig& config, std::uint64_t seed,
                        ParamRole role = ParamRole::Segmentation, const std::string& prefix = "");

// Backbone (all but the last decoder block) under "rcn." plus per-rater last
// decoder block and 1x1 output under "rcn.head<r>.".
ParameterSet build_rcn(const UNetConfig& config, std::size_t raters, std::uint64_t seed);

// Heads only, for the variant whose backbone is the segmentation net itself.
ParameterSet build_rcn_heads(const UNetConfig& config, std::size_t raters, std::uint64_t seed);

// Graph handles for a ParameterSet, in entry order.
class ParamVars {
 public:
  ParamVars(ad::Graph& graph, const ParameterSet& params, bool trainable);
  ad::Var operator[](const std::string& key) const { return vars_[params_->index_of(key)]; }
  const std::vector<ad::Var>& vars() const noexcept { return vars_; }
  const ParameterSet& params() const noexcept { return *params_; }

 private:
  const ParameterSet* params_;
  std::vector<ad::Var> vars_;
};

// Activations [N,L,H,W] of a plain U-Net whose keys start with `prefix`.
ad::Var unet_forward(const UNetConfig& config, const ParamVars& params, ad::Var input,
                     const std::string& prefix = "");

struct RcnOutputs {
  ad::Var segmentation;             // only set for the shared variant
  std::vector<ad::Var> heads;       // one [N,L,H,W] activation per rater
};

ad::Var forward_soft_label_net(const UNetConfig& config, const ParamVars& params, ad::Var stack_input);
ad::Var forward_seg_net(const UNetConfig& config, const ParamVars& params, ad::Var image);
std::vector<ad::Var> forward_rcn(const UNetConfig& config, const ParamVars& params, ad::Var image,
                                 std::size_t raters);
// Segmentation net and heads sharing the segmentation trunk.
RcnOutputs forward_seg_with_heads(const UNetConfig& config, const ParamVars& seg,
                                  const ParamVars& heads, ad::Var image, std::size_t raters);

// Soft-label net input: [N,R,H,W] with label/(L-1), or [N,R*L,H,W] one-hot.
Tensor encode_stacks(std::span<const AnnotationStack* const> stacks, std::size_t classes,
                     bool one_hot = false);
Tensor encode_stack(const AnnotationStack& stack, std::size_t classes, bool one_hot = false);
// Stacks [1,H,W] images into [N,1,H,W].
Tensor batch_images(std::span<const Tensor* const> images);

// Inference without gradients.
Tensor predict_activations(const UNetConfig& config, const ParameterSet& params, const Tensor& input,
                           const std::string& prefix = "");

// Checkpoint directory: index.json plus one LFT1 file per key.
void save_checkpoint(const std::filesystem::path& dir, const ParameterSet& params,
                     const std::string& extra_json = "{}");
ParameterSet load_checkpoint(const std::filesystem::path& dir);
// Integrity error unless `params` has exactly the keys and shapes of `expected`.
void require_same_layout(const ParameterSet& params, const ParameterSet& expected);

}  // namespace labelfill
