// Copyright 2026 The ged Authors.
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

// Minimal reverse-mode differentiation over Tensor values.
//
// A Var is a handle to a node in a dynamically recorded graph. Leaves that
// require gradients (parameters) keep their node alive across forward passes,
// so repeated backward() calls accumulate into the same grad buffer until it
// is cleared; that is how gradient accumulation over micro-batches works.

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ged/tensor.hpp"

namespace ged {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  /// Returns the grad buffer, allocating zeros on first use.
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor value);
  static Var leaf(Tensor value, bool requires_grad);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  /// Gradient accumulated so far; an all-zero tensor if nothing flowed in.
  Tensor grad() const;
  void zero_grad() { node_->grad = Tensor(); }
  const std::vector<int>& shape() const { return node_->value.shape(); }
  double item() const;
  bool defined() const { return static_cast<bool>(node_); }
  const std::shared_ptr<Node>& node() const { return node_; }

  /// Seeds d(this)/d(this) = 1 (scalar only) and propagates to every leaf.
  void backward() const;

 private:
  std::shared_ptr<Node> node_;
};

bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds a result node. `backward` receives the result node; its `grad`
/// holds dL/d(result) and the callback adds into parents' grad buffers.
/// Parents that do not require gradients must be skipped by the callback.
Var make_result(Tensor value, std::vector<Var> parents,
                std::function<void(Node&)> backward);

// Elementwise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var square(const Var& a);
Var sqrt_op(const Var& a);
Var silu(const Var& a);
Var tanh_op(const Var& a);
Var clamp(const Var& a, double lo, double hi);

// Reductions to a scalar of shape {1}.
Var sum(const Var& a);
Var mean(const Var& a);
/// Sums a list of scalars in order.
Var sum_scalars(const std::vector<Var>& terms);

// Shape manipulation.
Var reshape(const Var& a, std::vector<int> shape);
Var transpose2d(const Var& a);
Var concat_channels(const Var& a, const Var& b);
Var upsample_nearest2x(const Var& a);

// Linear algebra. Vectors are rank-1; row batches are [N, D].
Var linear(const Var& x, const Var& weight, const Var& bias);
Var linear_rows(const Var& x, const Var& weight, const Var& bias);
Var matmul(const Var& a, const Var& b);
Var softmax_rows(const Var& a);

/// 2-D convolution of x [Cin, H, W] with weight [Cout, Cin, k, k] and bias
/// [Cout], zero padding, square stride.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);
/// Adds v [C] to every pixel of x [C, H, W].
Var add_channel_bias(const Var& x, const Var& v);

}  // namespace ged
