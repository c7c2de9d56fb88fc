/*
 * Copyright 2026 The NLD Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <vector>

#include "autodiff/tensor.hpp"

namespace nld::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const { return value()[0]; }

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear record of primitive operations. Nodes are appended in evaluation
/// order, so every node's parents precede it and the reverse sweep is a plain
/// backwards loop.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var leaf(Tensor value);
  /// Non-differentiable input.
  Var constant(Tensor value);

  /// Records an op result. `backward` is dropped when no parent needs a
  /// gradient.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward);

  /// Reverse sweep from a 1 x 1 root. Clears gradients from any previous sweep.
  void backward(Var root);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  /// Gradient after backward(); a zero tensor for nodes off every root path.
  const Tensor& grad(std::size_t id);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Adds `g` into the gradient of node `id` (allocating it on first use).
  void accumulate(std::size_t id, const Tensor& g);
  /// Mutable gradient buffer for node `id`, zero-initialised on first use.
  Tensor& grad_buffer(std::size_t id);
  /// Gradient flowing into node `self`; valid inside a BackwardFn.
  const Tensor& upstream(std::size_t self) const { return nodes_[self].grad; }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
};

/// Gradients of a scalar root with respect to `leaves`, in order. Leaves that
/// do not influence the root get zeros.
std::vector<Tensor> backward(Tape& tape, Var root, const std::vector<Var>& leaves);

// Elementwise binary ops broadcast a dimension of extent 1 against any extent
// (bias rows, scalar factors).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var neg(Var a);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);

/// a * b, or a * b^T when `transpose_b`.
Var matmul(Var a, Var b, bool transpose_b = false);

Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var sqrt(Var a);

/// Sum of all entries -> 1 x 1.
Var sum(Var a);
/// Per-row sums -> rows x 1.
Var sum_cols(Var a);
/// Per-column sums -> 1 x cols.
Var sum_rows(Var a);

Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var concat_rows(const std::vector<Var>& parts);
Var broadcast_to(Var a, std::size_t rows, std::size_t cols);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator*(double s, Var a) { return scale(a, s); }

// Value-level helpers shared with non-taped evaluation.
double softplus_value(double x);
double softplus_inverse(double y);
double sigmoid_value(double x);

}  // namespace nld::ad
