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

#include <Eigen/Core>

#include <functional>
#include <span>
#include <vector>

#include "autodiff/tape.hpp"

namespace nld::ad {

/// Builds a scalar on `tape` from the leaf `x`.
using TapedScalarFn = std::function<Var(Tape& tape, Var x)>;

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::vector<double> ad_gradient;
  std::vector<double> fd_gradient;
};

/// Compares the reverse-mode gradient of `f` at `x` against central finite
/// differences with step `h`. Error per coordinate is
/// |g_ad - g_fd| / (|g_fd| + 1e-12); the maximum is returned.
GradientCheckResult gradient_check(const TapedScalarFn& f, const Tensor& x, double h = 1e-5);

using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

/// Hessian from central differences of an exact gradient, with per-coordinate
/// step h * (1 + |x_i|), returned symmetrised as (H + H^T) / 2.
Eigen::MatrixXd hessian_fd(const GradientFn& grad_f, std::span<const double> x, double h = 1e-5);

}  // namespace nld::ad
