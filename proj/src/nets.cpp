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

#include "labelfill/nets.hpp"

#include <cmath>

#include "json.hpp"
#include "labelfill/error.hpp"
#include "labelfill/io.hpp"
#include "labelfill/rng.hpp"

namespace labelfill {

void UNetConfig::validate() const {
  require(in_channels >= 1, ErrorKind::Configuration, "U-Net needs at least one input channel");
  require(classes >= 2, ErrorKind::Configuration, "U-Net needs at least two classes");
  require(channels.size() >= 2, ErrorKind::Configuration,
          "U-Net channel list needs at least two entries (one encoder block and the bottleneck)");
  for (std::size_t c : channels) {
    require(c >= 1, ErrorKind::Configuration, "U-Net channel widths must be positive");
  }
}

void UNetConfig::check_extent(std::size_t height, std::size_t width) const {
  const std::size_t f = std::size_t{1} << (depth() - 1);
  require(height % f == 0 && width % f == 0, ErrorKind::Configuration,
          "input extent " + std::to_string(height) + "x" + std::to_string(width) +
              " is not divisible by 2^" + std::to_string(depth() - 1) + " = " + std::to_string(f));
}

const char* to_string(ParamRole role) {
  switch (role) {
    case ParamRole::SoftLabel: return "soft_label";
    case ParamRole::Segmentation: return "segmentation";
    case ParamRole::RcnBackbone: return "rcn_backbone";
    case ParamRole::RcnHead: return "rcn_head";
  }
  return "?";
}

ParamRole parse_param_role(const std::string& name) {
  for (ParamRole r : {ParamRole::SoftLabel, ParamRole::Segmentation, ParamRole::RcnBackbone,
                      ParamRole::RcnHead}) {
    if (name == to_string(r)) return r;
  }
  fail(ErrorKind::Integrity, "unknown parameter role '" + name + "'");
}

void ParameterSet::add(std::string key, ParamRole role, Tensor value, int head) {
  require(!contains(key), ErrorKind::Integrity, "duplicate parameter key '" + key + "'");
  index_[key] = entries_.size();
  entries_.push_back({std::move(key), role, head, std::move(value)});
}

std::size_t ParameterSet::index_of(const std::string& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) fail(ErrorKind::Integrity, "missing parameter key '" + key + "'");
  return it->second;
}

void ParameterSet::set(const std::string& key, Tensor value) {
  ParamEntry& e = entries_[index_of(key)];
  require(e.value.shape() == value.shape(), ErrorKind::Dimension,
          "parameter '" + key + "' has shape " + shape_string(e.value.shape()) + ", got " +
              shape_string(value.shape()));
  e.value = std::move(value);
}

std::size_t ParameterSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

std::vector<std::string> ParameterSet::keys() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.key);
  return out;
}

void ParameterSet::merge(const ParameterSet& other) {
  for (const auto& e : other.entries_) add(e.key, e.role, e.value, e.head);
}

namespace {

class Initializer {
 public:
  Initializer(ParameterSet& out, std::uint64_t seed, ParamRole role, int head)
      : out_(out), rng_(seed), role_(role), head_(head) {}

  void conv(const std::string& key, std::size_t cin, std::size_t cout, std::size_t k) {
    const double bound = std::sqrt(6.0 / static_cast<double>(cin * k * k));
    Tensor w(Shape{cout, cin, k, k});
    for (auto& v : w.data()) v = rng_.uniform(-bound, bound);
    out_.add(key + ".weight", role_, std::move(w), head_);
    out_.add(key + ".bias", role_, Tensor(Shape{cout}), head_);
  }

  void block(const std::string& key, std::size_t cin, std::size_t cout) {
    conv(key + ".conv0", cin, cout, 3);
    conv(key + ".conv1", cout, cout, 3);
  }

  void set_role(ParamRole role, int head) {
    role_ = role;
    head_ = head;
  }

 private:
  ParameterSet& out_;
  Rng rng_;
  ParamRole role_;
  int head_;
};

// Encoder, bottleneck and every decoder block except the last.
void init_trunk(Initializer& init, const UNetConfig& c, const std::string& prefix) {
  const std::size_t d = c.depth();
  std::size_t cin = c.in_channels;
  for (std::size_t k = 0; k + 1 < d; ++k) {
    init.block(prefix + "enc" + std::to_string(k), cin, c.channels[k]);
    cin = c.channels[k];
  }
  init.block(prefix + "bottleneck", cin, c.channels[d - 1]);
  for (std::size_t k = 0; k + 2 < d; ++k) {
    const std::size_t level = d - 2 - k;
    init.block(prefix + "dec" + std::to_string(k), c.channels[level + 1] + c.channels[level],
               c.channels[level]);
  }
}

void init_last(Initializer& init, const UNetConfig& c, const std::string& dec_key,
               const std::string& out_key) {
  init.block(dec_key, c.channels[1] + c.channels[0], c.channels[0]);
  init.conv(out_key, c.channels[0], c.classes, 1);
}

std::string last_dec(const UNetConfig& c) { return "dec" + std::to_string(c.depth() - 2); }

ad::Var block(const ParamVars& p, const std::string& key, ad::Var x) {
  for (const char* conv : {".conv0", ".conv1"}) {
    x = ad::relu(ad::conv2d(x, p[key + conv + ".weight"], p[key + conv + ".bias"], 1));
  }
  return x;
}

struct Trunk {
  ad::Var x;     // deepest features entering the last decoder block
  ad::Var skip;  // first encoder block output
};

Trunk run_trunk(const UNetConfig& c, const ParamVars& p, ad::Var x, const std::string& prefix) {
  require(x.shape().size() == 4 && x.shape()[1] == c.in_channels, ErrorKind::Configuration,
          "network expects [N," + std::to_string(c.in_channels) + ",H,W] input, got " +
              shape_string(x.shape()));
  c.check_extent(x.shape()[2], x.shape()[3]);
  const std::size_t d = c.depth();
  std::vector<ad::Var> skips;
  for (std::size_t k = 0; k + 1 < d; ++k) {
    x = block(p, prefix + "enc" + std::to_string(k), x);
    skips.push_back(x);
    x = ad::pool_down(x);
  }
  x = block(p, prefix + "bottleneck", x);
  for (std::size_t k = 0; k + 2 < d; ++k) {
    x = ad::concat_channels(ad::upsample_nn(x), skips[d - 2 - k]);
    x = block(p, prefix + "dec" + std::to_string(k), x);
  }
  return {x, skips[0]};
}

ad::Var run_last(const ParamVars& p, const Trunk& t, const std::string& dec_key,
                 const std::string& out_key) {
  ad::Var x = ad::concat_channels(ad::upsample_nn(t.x), t.skip);
  x = block(p, dec_key, x);
  return ad::conv2d(x, p[out_key + ".weight"], p[out_key + ".bias"], 0);
}

std::string head_prefix(std::size_t r) { return "rcn.head" + std::to_string(r) + "."; }

}  // namespace

ParameterSet build_unet(const UNetConfig& config, std::uint64_t seed, ParamRole role,
                        const std::string& prefix) {
  config.validate();
  ParameterSet out;
  Initializer init(out, seed, role, -1);
  init_trunk(init, config, prefix);
  init_last(init, config, prefix + last_dec(config), prefix + "out");
  return out;
}

ParameterSet build_rcn(const UNetConfig& config, std::size_t raters, std::uint64_t seed) {
  config.validate();
  require(raters >= 1, ErrorKind::Configuration, "RCN needs at least one head");
  ParameterSet out;
  Initializer init(out, seed, ParamRole::RcnBackbone, -1);
  init_trunk(init, config, "rcn.");
  for (std::size_t r = 0; r < raters; ++r) {
    init.set_role(ParamRole::RcnHead, static_cast<int>(r));
    init_last(init, config, head_prefix(r) + "dec", head_prefix(r) + "out");
  }
  return out;
}

ParameterSet build_rcn_heads(const UNetConfig& config, std::size_t raters, std::uint64_t seed) {
  config.validate();
  require(raters >= 1, ErrorKind::Configuration, "RCN needs at least one head");
  ParameterSet out;
  Initializer init(out, seed, ParamRole::RcnHead, 0);
  for (std::size_t r = 0; r < raters; ++r) {
    init.set_role(ParamRole::RcnHead, static_cast<int>(r));
    init_last(init, config, head_prefix(r) + "dec", head_prefix(r) + "out");
  }
  return out;
}

ParamVars::ParamVars(ad::Graph& graph, const ParameterSet& params, bool trainable) : params_(&params) {
  vars_.reserve(params.size());
  for (const auto& e : params.entries()) {
    vars_.push_back(trainable ? graph.leaf(e.value) : graph.constant(e.value));
  }
}

ad::Var unet_forward(const UNetConfig& config, const ParamVars& params, ad::Var input,
                     const std::string& prefix) {
  const Trunk t = run_trunk(config, params, input, prefix);
  return run_last(params, t, prefix + last_dec(config), prefix + "out");
}

ad::Var forward_soft_label_net(const UNetConfig& config, const ParamVars& params, ad::Var stack_input) {
  require(stack_input.shape().size() == 4 && stack_input.shape()[1] == config.in_channels,
          ErrorKind::Configuration,
          "soft-label net built for " + std::to_string(config.in_channels) +
              " input channels, got stack input " + shape_string(stack_input.shape()));
  return unet_forward(config, params, stack_input);
}

ad::Var forward_seg_net(const UNetConfig& config, const ParamVars& params, ad::Var image) {
  return unet_forward(config, params, image);
}

std::vector<ad::Var> forward_rcn(const UNetConfig& config, const ParamVars& params, ad::Var image,
                                 std::size_t raters) {
  require(params.params().contains(head_prefix(raters - 1) + "out.weight") &&
              !params.params().contains(head_prefix(raters) + "out.weight"),
          ErrorKind::Configuration,
          "RCN parameters do not have exactly " + std::to_string(raters) + " heads");
  const Trunk t = run_trunk(config, params, image, "rcn.");
  std::vector<ad::Var> out;
  for (std::size_t r = 0; r < raters; ++r) {
    out.push_back(run_last(params, t, head_prefix(r) + "dec", head_prefix(r) + "out"));
  }
  return out;
}

RcnOutputs forward_seg_with_heads(const UNetConfig& config, const ParamVars& seg,
                                  const ParamVars& heads, ad::Var image, std::size_t raters) {
  require(heads.params().contains(head_prefix(raters - 1) + "out.weight") &&
              !heads.params().contains(head_prefix(raters) + "out.weight"),
          ErrorKind::Configuration,
          "RCN head parameters do not have exactly " + std::to_string(raters) + " heads");
  const Trunk t = run_trunk(config, seg, image, "");
  RcnOutputs out;
  out.segmentation = run_last(seg, t, last_dec(config), "out");
  for (std::size_t r = 0; r < raters; ++r) {
    out.heads.push_back(run_last(heads, t, head_prefix(r) + "dec", head_prefix(r) + "out"));
  }
  return out;
}

Tensor encode_stacks(std::span<const AnnotationStack* const> stacks, std::size_t classes, bool one_hot) {
  require(!stacks.empty(), ErrorKind::Usage, "no stacks to encode");
  require(classes >= 2, ErrorKind::Configuration, "class count must be at least 2");
  const std::size_t r = stacks[0]->raters(), h = stacks[0]->height(), w = stacks[0]->width();
  const std::size_t ch = one_hot ? r * classes : r;
  Tensor out(Shape{stacks.size(), ch, h, w});
  const double denom = static_cast<double>(classes - 1);
  for (std::size_t n = 0; n < stacks.size(); ++n) {
    const AnnotationStack& s = *stacks[n];
    require(s.raters() == r && s.height() == h && s.width() == w, ErrorKind::Dimension,
            "stacks in one batch differ in shape");
    for (std::size_t k = 0; k < r; ++k) {
      for (std::size_t p = 0; p < h * w; ++p) {
        const std::size_t l = s[k][p];
        require(l < classes, ErrorKind::Data, "stack label " + std::to_string(l) + " out of range");
        if (one_hot) {
          out[((n * ch) + k * classes + l) * h * w + p] = 1.0;
        } else {
          out[((n * ch) + k) * h * w + p] = static_cast<double>(l) / denom;
        }
      }
    }
  }
  return out;
}

Tensor encode_stack(const AnnotationStack& stack, std::size_t classes, bool one_hot) {
  const AnnotationStack* one[] = {&stack};
  return encode_stacks(one, classes, one_hot);
}

Tensor batch_images(std::span<const Tensor* const> images) {
  require(!images.empty(), ErrorKind::Usage, "no images to batch");
  const Shape& s = images[0]->shape();
  require(s.size() == 3, ErrorKind::Dimension, "images must be [C,H,W], got " + shape_string(s));
  Tensor out(Shape{images.size(), s[0], s[1], s[2]});
  const std::size_t n = images[0]->size();
  for (std::size_t k = 0; k < images.size(); ++k) {
    require(images[k]->shape() == s, ErrorKind::Dimension, "images in one batch differ in shape");
    std::copy(images[k]->values().begin(), images[k]->values().end(), out.data().begin() + static_cast<std::ptrdiff_t>(k * n));
  }
  return out;
}

Tensor predict_activations(const UNetConfig& config, const ParameterSet& params, const Tensor& input,
                           const std::string& prefix) {
  ad::Graph g;
  const ParamVars p(g, params, false);
  return unet_forward(config, p, g.constant(input), prefix).value();
}

void save_checkpoint(const std::filesystem::path& dir, const ParameterSet& params,
                     const std::string& extra_json) {
  nlohmann::json index;
  index["format"] = "labelfill-checkpoint-1";
  try {
    index["meta"] = nlohmann::json::parse(extra_json);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Usage, std::string("checkpoint metadata is not JSON: ") + e.what());
  }
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : params.entries()) {
    const std::string file = e.key + ".lft";
    save_tensor(dir / file, e.value);
    entries.push_back({{"key", e.key}, {"file", file}, {"shape", e.value.shape()},
                       {"role", to_string(e.role)}, {"head", e.head}});
  }
  index["entries"] = std::move(entries);
  write_text_atomic(dir / "index.json", index.dump(2) + "\n");
}

ParameterSet load_checkpoint(const std::filesystem::path& dir) {
  ParameterSet out;
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(read_text(dir / "index.json"));
    for (const auto& e : index.at("entries")) {
      const std::string key = e.at("key").get<std::string>();
      Tensor value = load_f64(dir / e.at("file").get<std::string>());
      const auto shape = e.at("shape").get<Shape>();
      require(value.shape() == shape, ErrorKind::Integrity,
              "checkpoint entry '" + key + "' has shape " + shape_string(value.shape()) +
                  " but the index records " + shape_string(shape));
      out.add(key, parse_param_role(e.at("role").get<std::string>()), std::move(value),
              e.at("head").get<int>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, (dir / "index.json").string() + ": " + e.what());
  }
  return out;
}

void require_same_layout(const ParameterSet& params, const ParameterSet& expected) {
  for (const auto& e : expected.entries()) {
    require(params.contains(e.key), ErrorKind::Integrity, "checkpoint is missing key '" + e.key + "'");
    require(params.value(e.key).shape() == e.value.shape(), ErrorKind::Integrity,
            "checkpoint key '" + e.key + "' has shape " + shape_string(params.value(e.key).shape()) +
                ", expected " + shape_string(e.value.shape()));
  }
  require(params.size() == expected.size(), ErrorKind::Integrity,
          "checkpoint has " + std::to_string(params.size()) + " keys, expected " +
              std::to_string(expected.size()));
}

}  // namespace labelfill
