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

#include "autodiff/numdiff.hpp"

#include <algorithm>
#include <cmath>

namespace nld::ad {

namespace {

double evaluate(const TapedScalarFn& f, const Tensor& x) {
  Tape tape;
  Var root = f(tape, tape.constant(x));
  if (root.rows() != 1 || root.cols() != 1) throw Error(ErrorCode::NonScalarRoot, "function is not scalar");
  return root.scalar();
}

}  // namespace

GradientCheckResult gradient_check(const TapedScalarFn& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "finite-difference step must be positive");
  GradientCheckResult result;
  {
    Tape tape;
    Var leaf = tape.leaf(x);
    Var root = f(tape, leaf);
    tape.backward(root);
    const Tensor& g = tape.grad(leaf.id());
    result.ad_gradient.assign(g.values().begin(), g.values().end());
  }
  result.fd_gradient.resize(x.size());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = evaluate(f, probe);
    probe[i] = x[i] - h;
    const double down = evaluate(f, probe);
    probe[i] = x[i];
    result.fd_gradient[i] = (up - down) / (2.0 * h);
    const double err = std::abs(result.ad_gradient[i] - result.fd_gradient[i]) /
                       (std::abs(result.fd_gradient[i]) + 1e-12);
    result.max_relative_error = std::max(result.max_relative_error, err);
  }
  return result;
}

Eigen::MatrixXd hessian_fd(const GradientFn& grad_f, std::span<const double> x, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "finite-difference step must be positive");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd hessian(n, n);
  std::vector<double> probe(x.begin(), x.end());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double step = h * (1.0 + std::abs(x[i]));
    probe[i] = x[i] + step;
    const std::vector<double> up = grad_f(probe);
    probe[i] = x[i] - step;
    const std::vector<double> down = grad_f(probe);
    probe[i] = x[i];
    if (up.size() != x.size() || down.size() != x.size()) {
      throw Error(ErrorCode::ShapeMismatch, "gradient length differs from point dimension");
    }
    for (Eigen::Index j = 0; j < n; ++j) hessian(j, i) = (up[j] - down[j]) / (2.0 * step);
  }
  return 0.5 * (hessian + hessian.transpose());
}

}  // namespace nld::ad
