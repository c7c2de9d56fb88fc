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

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "model/model.hpp"
#include "sde/sde.hpp"

namespace nld::analysis {

/// A differentiable scalar function on R^dim. `evaluate` returns the value
/// and writes the gradient.
struct ScalarField {
  std::size_t dim = 0;
  std::function<double(std::span<const double> z, std::span<double> gradient)> evaluate;

  double value(std::span<const double> z) const;
  std::vector<double> gradient(std::span<const double> z) const;
};

/// The model energy over the position block with the output bias dropped.
ScalarField energy_field(const model::NldModel& model);

struct FlowOptions {
  double step = 0.1;
  double tolerance = 1e-6;  // on |grad E|
  std::size_t max_iters = 100000;
};

struct FlowResult {
  std::vector<double> point;
  double energy = 0.0;
  std::size_t iterations = 0;
  bool converged = false;  // false: max_iters reached, point still returned
};

/// Gradient descent with backtracking: a step that raises the energy is
/// halved and retried, an accepted step lets the next one grow by 1.5x.
/// Accepted iterates never increase the energy.
FlowResult gradient_flow(const ScalarField& field, std::span<const double> z0, const FlowOptions& options = {});

struct Minimum {
  std::vector<double> point;
  double energy = 0.0;
};

using StartSampler = std::function<std::vector<double>(std::size_t index)>;

/// Flows from `n_starts` sampled points and merges endpoints closer than
/// `merge_tol`; each cluster keeps its lowest-energy member. Sorted by energy.
std::vector<Minimum> find_minima(const ScalarField& field, std::size_t n_starts, const StartSampler& sampler,
                                 double merge_tol = 1e-2, const FlowOptions& options = {});

/// Index of the nearest minimum within `merge_tol`, if any.
std::optional<std::size_t> assign_to_minimum(std::span<const double> point, const std::vector<Minimum>& minima,
                                             double merge_tol);

struct SamplingOptions {
  std::size_t n_samples = 1000;
  std::size_t burn_in = 10000;
  std::size_t thin = 100;
  double dt = 0.05;
  std::uint64_t seed = 0;
};

struct SamplingResult {
  std::vector<double> weights;
  std::size_t unassigned = 0;
  std::vector<std::vector<double>> samples;  // position block of each kept state
};

/// Draws thinned states from one long prior trajectory started at the origin.
std::vector<std::vector<double>> sample_stationary(const sde::SdeSystem& prior, std::size_t position_dim,
                                                   const SamplingOptions& options);

/// Method (a): well frequencies of flowed stationary samples. Samples that
/// reach no known minimum are counted in `unassigned` and excluded from the
/// frequencies; throws UnassignedSample when none is assigned.
SamplingResult weights_sampling(const sde::SdeSystem& prior, std::size_t position_dim, const ScalarField& field,
                                const std::vector<Minimum>& minima, const SamplingOptions& options = {},
                                double merge_tol = 1e-2, const FlowOptions& flow = {});
SamplingResult weights_sampling(const model::NldModel& model, const std::vector<Minimum>& minima,
                                const SamplingOptions& options = {}, double merge_tol = 1e-2,
                                const FlowOptions& flow = {});

/// Method (b): softmax(-beta E_i).
std::vector<double> weights_zeroth(std::span<const double> energies, double beta);

/// Method (c): Laplace masses exp(-beta E_i) (2 pi / beta)^(d/2) det(H_i)^(-1/2),
/// normalised. Throws NonPositiveDefiniteHessian naming the first bad index.
std::vector<double> weights_second(std::span<const double> energies, const std::vector<Eigen::MatrixXd>& hessians,
                                   double beta);

/// Central-difference Hessian of the field's analytic gradient.
Eigen::MatrixXd field_hessian(const ScalarField& field, std::span<const double> z, double h = 1e-5);

double l1_distance(std::span<const double> p, std::span<const double> q);

struct WellReport {
  std::vector<Minimum> minima;
  std::vector<Eigen::MatrixXd> hessians;
  std::vector<double> weights_sampling;
  std::vector<double> weights_zeroth;
  std::vector<double> weights_second;
  double beta = 1.0;
  std::size_t unassigned_samples = 0;
  std::size_t discarded_stationary_points = 0;  // flow endpoints with a non-PD Hessian
  std::size_t nonconverged_flows = 0;

  std::vector<double> energies() const;
  nlohmann::json to_json() const;
};

struct AnalysisOptions {
  std::size_t n_starts = 200;
  double merge_tol = 1e-2;
  FlowOptions flow;
  SamplingOptions sampling;
};

/// Full pipeline: stationary samples seed the minimum search, flow endpoints
/// whose Hessian is not positive definite (saddles, plateaus) are discarded,
/// then all three estimators run at the model's current beta.
WellReport analyze(const model::NldModel& model, const AnalysisOptions& options = {});

}  // namespace nld::analysis
