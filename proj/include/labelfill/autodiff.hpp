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

// Tape-style reverse-mode differentiation over dense tensors.
//
// A Graph records every value produced by an op together with the ids of
// its inputs. Nodes are appended in creation order, which is a topological
// order, so backward() walks the tape once from the root down to index 0.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "labelfill/tensor.hpp"

namespace labelfill::ad {

class Graph;

// Handle to one node in a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Graph* graph() const noexcept { return graph_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

struct BackwardArgs {
  std::span<const Tensor* const> inputs;
  const Tensor& output;
  const Tensor& output_grad;
  // Null for inputs that do not need a gradient.
  std::span<Tensor* const> input_grads;
};

using BackwardFn = std::function<void(const BackwardArgs&)>;

// Gradients of a scalar root with respect to the leaves of its graph.
class Gradients {
 public:
  // Zero tensor of the leaf's shape when the root does not depend on it.
  const Tensor& operator[](Var leaf) const;

 private:
  friend class Graph;
  std::vector<Tensor> by_node_;
  std::vector<bool> present_;
  std::vector<Tensor> zeros_;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Differentiable input.
  Var leaf(Tensor value);
  // Input excluded from differentiation.
  Var constant(Tensor value);

  // Appends an op result. `backward` is dropped when no input needs a
  // gradient. Non-finite outputs raise a Numeric error naming `op`.
  Var record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn backward);

  // Reverse sweep from a scalar root.
  Gradients backward(Var root) const;

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool needs_grad(Var v) const { return nodes_.at(v.id()).needs_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool needs_grad = false;
    bool is_leaf = false;
  };
  std::vector<Node> nodes_;
};

// ---- ops ------------------------------------------------------------------

// Cross-correlation. input [N,Cin,H,W], kernel [Cout,Cin,k,k], bias [Cout].
Var conv2d(Var input, Var kernel, Var bias, std::size_t padding);

Var relu(Var x);
Var add(Var a, Var b);  // identical shapes, or either side scalar
Var mul(Var a, Var b);  // identical shapes, or either side scalar
Var neg(Var x);
Var exp(Var x);
Var log(Var x);  // Domain error on the first non-positive entry
// log(max(x, floor)); the gradient is zero where the floor is active.
Var log_clamped(Var x, double floor);
Var scale(Var x, double factor);
Var sum(Var x);
// Sum of weights[i] * x[i]; weights are a constant of x's shape.
Var weighted_sum(Var x, const Tensor& weights);

// 2x2 max pooling with stride 2; ties go to the first entry in row-major order.
Var pool_down(Var x);
// Nearest-neighbour 2x upsampling.
Var upsample_nn(Var x);
// Concatenation along axis 1 of two [N,C,H,W] tensors.
Var concat_channels(Var a, Var b);

// Per-pixel softmax over axis 1 of [N,L,H,W] with temperature tau.
Var softmax_channel(Var x, double tau);
Tensor softmax_channel(const Tensor& x, double tau);

}  // namespace labelfill::ad
