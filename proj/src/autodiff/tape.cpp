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

#include "autodiff/tape.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>

namespace nld::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MutMap as_matrix(Tensor& t) {
  return MutMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

std::size_t broadcast_dim(std::size_t x, std::size_t y) {
  if (x == y) return x;
  if (x == 1) return y;
  if (y == 1) return x;
  throw Error(ErrorCode::ShapeMismatch,
              "cannot broadcast extents " + std::to_string(x) + " and " + std::to_string(y));
}

template <class F>
Tensor broadcast_binary(const Tensor& a, const Tensor& b, F f) {
  if (a.same_shape(b)) {
    Tensor out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  const std::size_t rows = broadcast_dim(a.rows(), b.rows());
  const std::size_t cols = broadcast_dim(a.cols(), b.cols());
  Tensor out(rows, cols);
  const bool ar = a.rows() == 1, ac = a.cols() == 1, br = b.rows() == 1, bc = b.cols() == 1;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out(r, c) = f(a(ar ? 0 : r, ac ? 0 : c), b(br ? 0 : r, bc ? 0 : c));
    }
  }
  return out;
}

// Sums a broadcast-shaped gradient back down to (rows, cols) and adds it to
// the target buffer.
void accumulate_reduced(Tensor& target, const Tensor& g) {
  if (target.same_shape(g)) {
    for (std::size_t i = 0; i < g.size(); ++i) target[i] += g[i];
    return;
  }
  const bool rr = target.rows() == 1, rc = target.cols() == 1;
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) {
      target(rr ? 0 : r, rc ? 0 : c) += g(r, c);
    }
  }
}

template <class Forward, class Local>
Var unary(Var a, Forward forward, Local local) {
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia, local](Tape& tape, std::size_t self) {
    const Tensor& g = tape.upstream(self);
    const Tensor& xv = tape.value(ia);
    const Tensor& yv = tape.value(self);
    Tensor& ga = tape.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * local(xv[i], yv[i]);
  });
}

Tape* common_tape(Var a, Var b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "operands recorded on different tapes");
  }
  return a.tape();
}

}  // namespace

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) needs = needs || nodes_[p.id()].requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw Error(ErrorCode::InvalidArgument, "root not on this tape");
  const Tensor& rv = nodes_[root.id()].value;
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw Error(ErrorCode::NonScalarRoot, "backward root has shape " + std::to_string(rv.rows()) +
                                              "x" + std::to_string(rv.cols()));
  }
  for (auto& node : nodes_) node.grad = Tensor();
  nodes_[root.id()].grad = Tensor::scalar(1.0);
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.backward && !node.grad.empty()) node.backward(*this, id);
  }
}

const Tensor& Tape::grad(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor(node.value.rows(), node.value.cols());
  return node.grad;
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  accumulate_reduced(grad_buffer(id), g);
}

std::vector<Tensor> backward(Tape& tape, Var root, const std::vector<Var>& leaves) {
  tape.backward(root);
  std::vector<Tensor> grads;
  grads.reserve(leaves.size());
  for (const Var& leaf : leaves) grads.push_back(tape.grad(leaf.id()));
  return grads;
}

Var add(Var a, Var b) {
  Tape* tape = common_tape(a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return tape->record(broadcast_binary(a.value(), b.value(), [](double x, double y) { return x + y; }),
                      {a, b}, [ia, ib](Tape& t, std::size_t self) {
                        const Tensor& g = t.upstream(self);
                        if (t.requires_grad(ia)) t.accumulate(ia, g);
                        if (t.requires_grad(ib)) t.accumulate(ib, g);
                      });
}

Var sub(Var a, Var b) {
  Tape* tape = common_tape(a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return tape->record(broadcast_binary(a.value(), b.value(), [](double x, double y) { return x - y; }),
                      {a, b}, [ia, ib](Tape& t, std::size_t self) {
                        const Tensor& g = t.upstream(self);
                        if (t.requires_grad(ia)) t.accumulate(ia, g);
                        if (t.requires_grad(ib)) {
                          Tensor ng(g.rows(), g.cols());
                          for (std::size_t i = 0; i < g.size(); ++i) ng[i] = -g[i];
                          t.accumulate(ib, ng);
                        }
                      });
}

Var mul(Var a, Var b) {
  Tape* tape = common_tape(a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return tape->record(broadcast_binary(a.value(), b.value(), [](double x, double y) { return x * y; }),
                      {a, b}, [ia, ib](Tape& t, std::size_t self) {
                        const Tensor& g = t.upstream(self);
                        auto times = [](double x, double y) { return x * y; };
                        if (t.requires_grad(ia)) t.accumulate(ia, broadcast_binary(g, t.value(ib), times));
                        if (t.requires_grad(ib)) t.accumulate(ib, broadcast_binary(g, t.value(ia), times));
                      });
}

Var div(Var a, Var b) {
  Tape* tape = common_tape(a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return tape->record(broadcast_binary(a.value(), b.value(), [](double x, double y) { return x / y; }),
                      {a, b}, [ia, ib](Tape& t, std::size_t self) {
                        const Tensor& g = t.upstream(self);
                        if (t.requires_grad(ia)) {
                          t.accumulate(ia, broadcast_binary(g, t.value(ib),
                                                            [](double x, double y) { return x / y; }));
                        }
                        if (t.requires_grad(ib)) {
                          // d(a/b)/db = -(a/b)/b
                          const Tensor gy = broadcast_binary(g, t.value(self),
                                                             [](double x, double y) { return -x * y; });
                          t.accumulate(ib, broadcast_binary(gy, t.value(ib),
                                                            [](double x, double y) { return x / y; }));
                        }
                      });
}

Var neg(Var a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var matmul(Var a, Var b, bool transpose_b) {
  Tape* tape = common_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t inner_b = transpose_b ? bv.cols() : bv.rows();
  if (av.cols() != inner_b) {
    throw Error(ErrorCode::ShapeMismatch, "matmul inner dimensions " + std::to_string(av.cols()) +
                                              " and " + std::to_string(inner_b));
  }
  Tensor out(av.rows(), transpose_b ? bv.rows() : bv.cols());
  if (transpose_b) {
    as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv).transpose();
  } else {
    as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape->record(std::move(out), {a, b}, [ia, ib, transpose_b](Tape& t, std::size_t self) {
    const auto g = as_matrix(t.upstream(self));
    const auto A = as_matrix(t.value(ia));
    const auto B = as_matrix(t.value(ib));
    if (t.requires_grad(ia)) {
      if (transpose_b) {
        as_matrix(t.grad_buffer(ia)).noalias() += g * B;
      } else {
        as_matrix(t.grad_buffer(ia)).noalias() += g * B.transpose();
      }
    }
    if (t.requires_grad(ib)) {
      if (transpose_b) {
        as_matrix(t.grad_buffer(ib)).noalias() += g.transpose() * A;
      } else {
        as_matrix(t.grad_buffer(ib)).noalias() += A.transpose() * g;
      }
    }
  });
}

double softplus_value(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw Error(ErrorCode::InvalidArgument, "softplus inverse needs a positive value");
  return y + std::log(-std::expm1(-y));
}

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(a, sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var a) {
  return unary(a, softplus_value, [](double x, double) { return sigmoid_value(x); });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(Var a) {
  return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var sum(Var a) {
  const Tensor& x = a.value();
  double total = 0.0;
  for (double v : x.values()) total += v;
  const std::size_t ia = a.id();
  return a.tape()->record(Tensor::scalar(total), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.upstream(self)[0];
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var sum_cols(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) total += x(r, c);
    out[r] = total;
  }
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g[r];
    }
  });
}

Var sum_rows(Var a) {
  const Tensor& x = a.value();
  Tensor out(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out[c] += x(r, c);
  }
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g[c];
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  if (begin > end || end > x.cols()) throw Error(ErrorCode::ShapeMismatch, "column slice out of range");
  Tensor out(x.rows(), end - begin);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = x(r, c);
  }
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, begin](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c + begin) += g(r, c);
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorCode::InvalidArgument, "concat of zero tensors");
  Tape* tape = parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.tape() != tape) throw Error(ErrorCode::InvalidArgument, "operands recorded on different tapes");
    if (p.rows() != rows) throw Error(ErrorCode::ShapeMismatch, "concat row counts differ");
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t offset = 0;
  bool needs = false;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < v.cols(); ++c) out(r, offset + c) = v(r, c);
    }
    ids.push_back(p.id());
    offsets.push_back(offset);
    offset += v.cols();
    needs = needs || tape->requires_grad(p.id());
  }
  // record() only inspects parents for requires_grad; pass a representative.
  Var any = parts.front();
  for (const Var& p : parts) {
    if (tape->requires_grad(p.id())) any = p;
  }
  return tape->record(std::move(out), {any}, [ids, offsets](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      Tensor& gp = t.grad_buffer(ids[k]);
      for (std::size_t r = 0; r < gp.rows(); ++r) {
        for (std::size_t c = 0; c < gp.cols(); ++c) gp(r, c) += g(r, offsets[k] + c);
      }
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  if (begin > end || end > x.rows()) throw Error(ErrorCode::ShapeMismatch, "row slice out of range");
  const std::size_t cols = x.cols();
  Tensor out(end - begin, cols,
             std::vector<double>(x.data() + begin * cols, x.data() + end * cols));
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, begin](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad_buffer(ia);
    double* dst = ga.data() + begin * ga.cols();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorCode::InvalidArgument, "concat of zero tensors");
  Tape* tape = parts.front().tape();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.tape() != tape) throw Error(ErrorCode::InvalidArgument, "operands recorded on different tapes");
    if (p.cols() != cols) throw Error(ErrorCode::ShapeMismatch, "concat column counts differ");
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  std::vector<std::size_t> ids, offsets;
  Var any = parts.front();
  for (const Var& p : parts) {
    offsets.push_back(data.size());
    ids.push_back(p.id());
    const auto values = p.value().values();
    data.insert(data.end(), values.begin(), values.end());
    if (tape->requires_grad(p.id())) any = p;
  }
  return tape->record(Tensor(rows, cols, std::move(data)), {any},
                      [ids, offsets](Tape& t, std::size_t self) {
                        const Tensor& g = t.upstream(self);
                        for (std::size_t k = 0; k < ids.size(); ++k) {
                          if (!t.requires_grad(ids[k])) continue;
                          Tensor& gp = t.grad_buffer(ids[k]);
                          const double* src = g.data() + offsets[k];
                          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += src[i];
                        }
                      });
}

Var broadcast_to(Var a, std::size_t rows, std::size_t cols) {
  const Tensor& x = a.value();
  if (broadcast_dim(x.rows(), rows) != rows || broadcast_dim(x.cols(), cols) != cols) {
    throw Error(ErrorCode::ShapeMismatch, "broadcast target smaller than source");
  }
  Tensor out(rows, cols);
  const bool rr = x.rows() == 1, rc = x.cols() == 1;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = x(rr ? 0 : r, rc ? 0 : c);
  }
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.upstream(self));
  });
}

}  // namespace nld::ad
