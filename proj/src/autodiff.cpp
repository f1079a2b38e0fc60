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

#include "labelfill/autodiff.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "labelfill/error.hpp"

namespace labelfill::ad {

const Tensor& Var::value() const {
  require(graph_ != nullptr, ErrorKind::Usage, "use of an unbound Var");
  return graph_->value(id_);
}

const Tensor& Gradients::operator[](Var leaf) const {
  require(leaf.id() < by_node_.size() && present_[leaf.id()], ErrorKind::Usage,
          "no gradient slot for node " + std::to_string(leaf.id()) +
              " (not a leaf of this graph)");
  return by_node_[leaf.id()];
}

Var Graph::leaf(Tensor value) {
  require_finite(value.data(), "leaf");
  nodes_.push_back(Node{std::move(value), {}, {}, true, true});
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  require_finite(value.data(), "constant");
  nodes_.push_back(Node{std::move(value), {}, {}, false, false});
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(const char* op, Tensor value, std::span<const Var> inputs,
                  BackwardFn backward) {
  require_finite(value.data(), op);
  Node node;
  node.value = std::move(value);
  for (const Var& v : inputs) {
    require(v.graph() == this, ErrorKind::Usage,
            std::string("input to ") + op + " belongs to another graph");
    node.inputs.push_back(v.id());
    node.needs_grad = node.needs_grad || nodes_[v.id()].needs_grad;
  }
  if (node.needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Graph::backward(Var root) const {
  require(root.graph() == this, ErrorKind::Usage, "root belongs to another graph");
  require(nodes_[root.id()].value.size() == 1 && nodes_[root.id()].value.ndim() == 0,
          ErrorKind::Usage,
          "backward requires a scalar root, got shape " +
              shape_string(nodes_[root.id()].value.shape()));

  Gradients out;
  out.by_node_.resize(nodes_.size());
  out.present_.assign(nodes_.size(), false);
  std::vector<bool> has(nodes_.size(), false);

  out.by_node_[root.id()] = Tensor::scalar(1.0);
  has[root.id()] = true;

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!has[i] || node.is_leaf || !node.backward) continue;
    in_values.clear();
    in_grads.clear();
    for (std::size_t in : node.inputs) {
      in_values.push_back(&nodes_[in].value);
      if (nodes_[in].needs_grad) {
        if (!has[in]) {
          out.by_node_[in] = Tensor(nodes_[in].value.shape(), 0.0);
          has[in] = true;
        }
        in_grads.push_back(&out.by_node_[in]);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    node.backward(BackwardArgs{in_values, node.value, out.by_node_[i], in_grads});
    // Interior gradients are no longer needed once propagated.
    out.by_node_[i] = Tensor();
  }

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].is_leaf) continue;
    if (!has[i]) out.by_node_[i] = Tensor(nodes_[i].value.shape(), 0.0);
    out.present_[i] = true;
  }
  return out;
}

// ---- helpers ----------------------------------------------------------------

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::Dimension, std::string(op) + ": shape mismatch " +
                                   shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

void require_rank4(const Tensor& t, const char* op, const char* what) {
  if (t.ndim() != 4) {
    fail(ErrorKind::Dimension, std::string(op) + ": " + what + " must be [N,C,H,W], got " +
                                   shape_string(t.shape()));
  }
}

bool is_scalar(const Tensor& t) { return t.ndim() == 0; }

// Shape of the result of a binary elementwise op; scalars broadcast.
Shape binary_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (is_scalar(a)) return b.shape();
  if (is_scalar(b)) return a.shape();
  require_same_shape(a, b, op);
  return a.shape();
}

Tensor* grad_slot(const BackwardArgs& args, std::size_t i) { return args.input_grads[i]; }

// Rows of `col` are `ld` apart.
void im2col(const double* x, std::size_t cin, std::size_t h, std::size_t w, std::size_t k,
            std::size_t pad, std::size_t ho, std::size_t wo, double* col, std::size_t ld) {
  const auto ipad = static_cast<std::ptrdiff_t>(pad);
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        double* row = col + ((c * k + ki) * k + kj) * ld;
        for (std::size_t oh = 0; oh < ho; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + ki) - ipad;
          double* dst = row + oh * wo;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + wo, 0.0);
            continue;
          }
          const double* src = x + (c * h + static_cast<std::size_t>(ih)) * w;
          // Valid output columns satisfy 0 <= ow + kj - pad < w.
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kj) - ipad;
          const std::size_t lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -shift));
          const std::size_t hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(
              static_cast<std::ptrdiff_t>(w) - shift, 0, static_cast<std::ptrdiff_t>(wo)));
          if (lo >= hi) {
            std::fill(dst, dst + wo, 0.0);
            continue;
          }
          std::fill(dst, dst + lo, 0.0);
          std::copy(src + static_cast<std::ptrdiff_t>(lo) + shift, src + static_cast<std::ptrdiff_t>(hi) + shift, dst + lo);
          std::fill(dst + hi, dst + wo, 0.0);
        }
      }
    }
  }
}

void col2im_add(const double* col, std::size_t cin, std::size_t h, std::size_t w,
                std::size_t k, std::size_t pad, std::size_t ho, std::size_t wo, double* dx,
                std::size_t ld) {
  const auto ipad = static_cast<std::ptrdiff_t>(pad);
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const double* row = col + ((c * k + ki) * k + kj) * ld;
        for (std::size_t oh = 0; oh < ho; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + ki) - ipad;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
          double* dst = dx + (c * h + static_cast<std::size_t>(ih)) * w;
          const double* src = row + oh * wo;
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kj) - ipad;
          const std::size_t lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -shift));
          const std::size_t hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(
              static_cast<std::ptrdiff_t>(w) - shift, 0, static_cast<std::ptrdiff_t>(wo)));
          for (std::size_t ow = lo; ow < hi; ++ow) {
            dst[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(ow) + shift)] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

// ---- convolution ------------------------------------------------------------

Var conv2d(Var input, Var kernel, Var bias, std::size_t padding) {
  const Tensor& x = input.value();
  const Tensor& wt = kernel.value();
  const Tensor& b = bias.value();
  require_rank4(x, "conv2d", "input");
  require_rank4(wt, "conv2d", "kernel");
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t cout = wt.dim(0), k = wt.dim(2);
  if (wt.dim(1) != cin) {
    fail(ErrorKind::Dimension, "conv2d: kernel axis 1 (Cin=" + std::to_string(wt.dim(1)) +
                                   ") does not match input axis 1 (Cin=" +
                                   std::to_string(cin) + ")");
  }
  if (wt.dim(3) != k || k % 2 == 0) {
    fail(ErrorKind::Dimension, "conv2d: kernel axes 2,3 must be equal and odd, got " +
                                   shape_string(wt.shape()));
  }
  if (b.ndim() != 1 || b.dim(0) != cout) {
    fail(ErrorKind::Dimension, "conv2d: bias must be [Cout=" + std::to_string(cout) +
                                   "], got " + shape_string(b.shape()));
  }
  if (h + 2 * padding < k || w + 2 * padding < k) {
    fail(ErrorKind::Dimension, "conv2d: input axes 2,3 " + shape_string(x.shape()) +
                                   " too small for kernel " + std::to_string(k) +
                                   " with padding " + std::to_string(padding));
  }
  const std::size_t ho = h + 2 * padding - k + 1, wo = w + 2 * padding - k + 1;
  const std::size_t kk = cin * k * k, p = ho * wo;

  Tensor out(Shape{n, cout, ho, wo});
  std::vector<double> col(kk * p);
  for (std::size_t s = 0; s < n; ++s) {
    im2col(x.data().data() + s * cin * h * w, cin, h, w, k, padding, ho, wo, col.data(), p);
    double* o = out.data().data() + s * cout * p;
    for (std::size_t co = 0; co < cout; ++co) std::fill(o + co * p, o + (co + 1) * p, b[co]);
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(cout),
                static_cast<int>(p), static_cast<int>(kk), 1.0, wt.data().data(),
                static_cast<int>(kk), col.data(), static_cast<int>(p), 1.0, o,
                static_cast<int>(p));
  }

  const Var inputs[] = {input, kernel, bias};
  return input.graph()->record(
      "conv2d", std::move(out), inputs, [=](const BackwardArgs& a) {
        const Tensor& xv = *a.inputs[0];
        const Tensor& wv = *a.inputs[1];
        const double* g = a.output_grad.data().data();
        Tensor* gx = grad_slot(a, 0);
        Tensor* gw = grad_slot(a, 1);
        Tensor* gb = grad_slot(a, 2);
        std::vector<double> colb(gw ? kk * p : 0);
        std::vector<double> dcol(gx ? kk * p : 0);
        for (std::size_t s = 0; s < n; ++s) {
          const double* gs = g + s * cout * p;
          if (gb) {
            for (std::size_t co = 0; co < cout; ++co) {
              double acc = 0.0;
              for (std::size_t q = 0; q < p; ++q) acc += gs[co * p + q];
              (*gb)[co] += acc;
            }
          }
          if (gw) {
            im2col(xv.data().data() + s * cin * h * w, cin, h, w, k, padding, ho, wo,
                   colb.data(), p);
            cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(cout),
                        static_cast<int>(kk), static_cast<int>(p), 1.0, gs,
                        static_cast<int>(p), colb.data(), static_cast<int>(p), 1.0,
                        gw->data().data(), static_cast<int>(kk));
          }
          if (gx) {
            cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(kk),
                        static_cast<int>(p), static_cast<int>(cout), 1.0, wv.data().data(),
                        static_cast<int>(kk), gs, static_cast<int>(p), 0.0, dcol.data(),
                        static_cast<int>(p));
            col2im_add(dcol.data(), cin, h, w, k, padding, ho, wo,
                       gx->data().data() + s * cin * h * w, p);
          }
        }
      });
}

// ---- elementwise ------------------------------------------------------------

Var relu(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  const Var in[] = {x};
  return x.graph()->record("relu", std::move(out), in, [](const BackwardArgs& a) {
    const Tensor& xv = *a.inputs[0];
    Tensor& g = *a.input_grads[0];
    for (std::size_t i = 0; i < xv.size(); ++i) {
      if (xv[i] > 0.0) g[i] += a.output_grad[i];
    }
  });
}

namespace {

// Accumulates d(out)/d(input) contributions when `input` may be a scalar.
void accumulate(Tensor& g, const Tensor& contribution) {
  if (g.ndim() == 0) {
    double acc = 0.0;
    for (double v : contribution.data()) acc += v;
    g[0] += acc;
  } else {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += contribution[i];
  }
}

double bval(const Tensor& t, std::size_t i) { return t.ndim() == 0 ? t[0] : t[i]; }

}  // namespace

Var add(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(binary_shape(av, bv, "add"));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = bval(av, i) + bval(bv, i);
  const Var in[] = {a, b};
  return a.graph()->record("add", std::move(out), in, [](const BackwardArgs& args) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (args.input_grads[k]) accumulate(*args.input_grads[k], args.output_grad);
    }
  });
}

Var mul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(binary_shape(av, bv, "mul"));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = bval(av, i) * bval(bv, i);
  const Var in[] = {a, b};
  return a.graph()->record("mul", std::move(out), in, [](const BackwardArgs& args) {
    const Tensor& av = *args.inputs[0];
    const Tensor& bv = *args.inputs[1];
    const Tensor& g = args.output_grad;
    if (args.input_grads[0]) {
      Tensor c(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i) c[i] = g[i] * bval(bv, i);
      accumulate(*args.input_grads[0], c);
    }
    if (args.input_grads[1]) {
      Tensor c(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i) c[i] = g[i] * bval(av, i);
      accumulate(*args.input_grads[1], c);
    }
  });
}

Var neg(Var x) { return scale(x, -1.0); }

Var scale(Var x, double factor) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = factor * xv[i];
  const Var in[] = {x};
  return x.graph()->record("scale", std::move(out), in, [factor](const BackwardArgs& a) {
    Tensor& g = *a.input_grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * a.output_grad[i];
  });
}

Var exp(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::exp(xv[i]);
  const Var in[] = {x};
  return x.graph()->record("exp", std::move(out), in, [](const BackwardArgs& a) {
    Tensor& g = *a.input_grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += a.output[i] * a.output_grad[i];
  });
}

Var log(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    if (!(xv[i] > 0.0)) {
      fail(ErrorKind::Domain, "log of non-positive value " + std::to_string(xv[i]) +
                                  " at flat index " + std::to_string(i));
    }
    out[i] = std::log(xv[i]);
  }
  const Var in[] = {x};
  return x.graph()->record("log", std::move(out), in, [](const BackwardArgs& a) {
    const Tensor& xv = *a.inputs[0];
    Tensor& g = *a.input_grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += a.output_grad[i] / xv[i];
  });
}

Var log_clamped(Var x, double floor) {
  require(floor > 0.0, ErrorKind::Usage, "log_clamped floor must be positive");
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::log(std::max(xv[i], floor));
  const Var in[] = {x};
  return x.graph()->record("log_clamped", std::move(out), in, [floor](const BackwardArgs& a) {
    const Tensor& xv = *a.inputs[0];
    Tensor& g = *a.input_grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > floor) g[i] += a.output_grad[i] / xv[i];
    }
  });
}

Var sum(Var x) {
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  const Var in[] = {x};
  return x.graph()->record("sum", Tensor::scalar(acc), in, [](const BackwardArgs& a) {
    Tensor& g = *a.input_grads[0];
    const double s = a.output_grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s;
  });
}

Var weighted_sum(Var x, const Tensor& weights) {
  const Tensor& xv = x.value();
  require_same_shape(xv, weights, "weighted_sum");
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += weights[i] * xv[i];
  const Var in[] = {x};
  return x.graph()->record("weighted_sum", Tensor::scalar(acc), in,
                           [weights](const BackwardArgs& a) {
                             Tensor& g = *a.input_grads[0];
                             const double s = a.output_grad[0];
                             for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * weights[i];
                           });
}

// ---- resampling -------------------------------------------------------------

Var pool_down(Var x) {
  const Tensor& xv = x.value();
  require_rank4(xv, "pool_down", "input");
  const std::size_t n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    fail(ErrorKind::Dimension, "pool_down: axes 2,3 must be even, got " +
                                   shape_string(xv.shape()));
  }
  const std::size_t ho = h / 2, wo = w / 2;
  Tensor out(Shape{n, c, ho, wo});
  std::vector<std::uint32_t> argmax(out.size());
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const double* src = xv.data().data() + plane * h * w;
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        const std::size_t cand[4] = {(2 * i) * w + 2 * j, (2 * i) * w + 2 * j + 1,
                                     (2 * i + 1) * w + 2 * j, (2 * i + 1) * w + 2 * j + 1};
        std::size_t best = cand[0];
        for (int t = 1; t < 4; ++t) {
          if (src[cand[t]] > src[best]) best = cand[t];
        }
        const std::size_t o = plane * ho * wo + i * wo + j;
        out[o] = src[best];
        argmax[o] = static_cast<std::uint32_t>(plane * h * w + best);
      }
    }
  }
  const Var in[] = {x};
  return x.graph()->record("pool_down", std::move(out), in,
                           [argmax = std::move(argmax)](const BackwardArgs& a) {
                             Tensor& g = *a.input_grads[0];
                             for (std::size_t o = 0; o < argmax.size(); ++o) {
                               g[argmax[o]] += a.output_grad[o];
                             }
                           });
}

Var upsample_nn(Var x) {
  const Tensor& xv = x.value();
  require_rank4(xv, "upsample_nn", "input");
  const std::size_t n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  Tensor out(Shape{n, c, 2 * h, 2 * w});
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const double* src = xv.data().data() + plane * h * w;
    double* dst = out.data().data() + plane * 4 * h * w;
    for (std::size_t i = 0; i < 2 * h; ++i) {
      for (std::size_t j = 0; j < 2 * w; ++j) dst[i * 2 * w + j] = src[(i / 2) * w + j / 2];
    }
  }
  const Var in[] = {x};
  return x.graph()->record("upsample_nn", std::move(out), in, [=](const BackwardArgs& a) {
    Tensor& g = *a.input_grads[0];
    for (std::size_t plane = 0; plane < n * c; ++plane) {
      const double* src = a.output_grad.data().data() + plane * 4 * h * w;
      double* dst = g.data().data() + plane * h * w;
      for (std::size_t i = 0; i < 2 * h; ++i) {
        for (std::size_t j = 0; j < 2 * w; ++j) dst[(i / 2) * w + j / 2] += src[i * 2 * w + j];
      }
    }
  });
}

Var concat_channels(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank4(av, "concat_channels", "first input");
  require_rank4(bv, "concat_channels", "second input");
  for (std::size_t axis : {0u, 2u, 3u}) {
    if (av.dim(axis) != bv.dim(axis)) {
      fail(ErrorKind::Dimension, "concat_channels: axis " + std::to_string(axis) +
                                     " differs: " + shape_string(av.shape()) + " vs " +
                                     shape_string(bv.shape()));
    }
  }
  const std::size_t n = av.dim(0), ca = av.dim(1), cb = bv.dim(1);
  const std::size_t plane = av.dim(2) * av.dim(3);
  Tensor out(Shape{n, ca + cb, av.dim(2), av.dim(3)});
  for (std::size_t s = 0; s < n; ++s) {
    std::copy_n(av.data().data() + s * ca * plane, ca * plane,
                out.data().data() + s * (ca + cb) * plane);
    std::copy_n(bv.data().data() + s * cb * plane, cb * plane,
                out.data().data() + (s * (ca + cb) + ca) * plane);
  }
  const Var in[] = {a, b};
  return a.graph()->record("concat_channels", std::move(out), in, [=](const BackwardArgs& args) {
    const double* g = args.output_grad.data().data();
    for (std::size_t s = 0; s < n; ++s) {
      if (Tensor* ga = args.input_grads[0]) {
        double* dst = ga->data().data() + s * ca * plane;
        const double* src = g + s * (ca + cb) * plane;
        for (std::size_t i = 0; i < ca * plane; ++i) dst[i] += src[i];
      }
      if (Tensor* gb = args.input_grads[1]) {
        double* dst = gb->data().data() + s * cb * plane;
        const double* src = g + (s * (ca + cb) + ca) * plane;
        for (std::size_t i = 0; i < cb * plane; ++i) dst[i] += src[i];
      }
    }
  });
}

// ---- softmax ----------------------------------------------------------------

Tensor softmax_channel(const Tensor& x, double tau) {
  require(tau > 0.0, ErrorKind::Usage, "softmax temperature must be positive");
  require_rank4(x, "softmax_channel", "input");
  const std::size_t n = x.dim(0), l = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor out(x.shape());
  for (std::size_t s = 0; s < n; ++s) {
    const double* src = x.data().data() + s * l * plane;
    double* dst = out.data().data() + s * l * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < l; ++c) mx = std::max(mx, src[c * plane + p]);
      double z = 0.0;
      for (std::size_t c = 0; c < l; ++c) {
        const double e = std::exp((src[c * plane + p] - mx) / tau);
        dst[c * plane + p] = e;
        z += e;
      }
      for (std::size_t c = 0; c < l; ++c) dst[c * plane + p] /= z;
    }
  }
  return out;
}

Var softmax_channel(Var x, double tau) {
  Tensor out = softmax_channel(x.value(), tau);
  const std::size_t n = out.dim(0), l = out.dim(1), plane = out.dim(2) * out.dim(3);
  const Var in[] = {x};
  return x.graph()->record("softmax_channel", std::move(out), in, [=](const BackwardArgs& a) {
    Tensor& g = *a.input_grads[0];
    for (std::size_t s = 0; s < n; ++s) {
      const double* q = a.output.data().data() + s * l * plane;
      const double* go = a.output_grad.data().data() + s * l * plane;
      double* gi = g.data().data() + s * l * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        double dot = 0.0;
        for (std::size_t c = 0; c < l; ++c) dot += q[c * plane + p] * go[c * plane + p];
        for (std::size_t c = 0; c < l; ++c) {
          gi[c * plane + p] += q[c * plane + p] * (go[c * plane + p] - dot) / tau;
        }
      }
    }
  });
}

}  // namespace labelfill::ad
