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

#include "analysis/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "autodiff/numdiff.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"

namespace nld::analysis {

using nlohmann::json;

namespace {

constexpr std::uint64_t kSamplingStream = 0x53414d50;

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::vector<double> normalize_log_weights(const std::vector<double>& log_w) {
  const double top = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> w(log_w.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += w[i] = std::exp(log_w[i] - top);
  for (double& x : w) x /= total;
  return w;
}

}  // namespace

double ScalarField::value(std::span<const double> z) const {
  std::vector<double> g(dim);
  return evaluate(z, g);
}

std::vector<double> ScalarField::gradient(std::span<const double> z) const {
  std::vector<double> g(dim);
  evaluate(z, g);
  return g;
}

ScalarField energy_field(const model::NldModel& model) {
  if (!model.has_energy()) throw Error(ErrorCode::InvalidArgument, "the free-drift baseline has no energy");
  return ScalarField{model.latent_dim(), [&model](std::span<const double> z, std::span<double> g) {
                       return model.energy_and_gradient(z, g, false);
                     }};
}

FlowResult gradient_flow(const ScalarField& field, std::span<const double> z0, const FlowOptions& options) {
  if (!(options.step > 0.0)) throw Error(ErrorCode::InvalidArgument, "flow step must be positive");
  if (z0.size() != field.dim) throw Error(ErrorCode::ShapeMismatch, "flow start dimension");
  FlowResult result;
  result.point.assign(z0.begin(), z0.end());
  std::vector<double> grad(field.dim), trial(field.dim), trial_grad(field.dim);
  double energy = field.evaluate(result.point, grad);
  double step = options.step;
  while (true) {
    if (norm(grad) < options.tolerance) {
      result.converged = true;
      break;
    }
    if (result.iterations >= options.max_iters) break;
    ++result.iterations;
    bool accepted = false;
    while (step > 1e-300) {
      for (std::size_t i = 0; i < field.dim; ++i) trial[i] = result.point[i] - step * grad[i];
      const double trial_energy = field.evaluate(trial, trial_grad);
      if (trial_energy <= energy) {
        result.point.swap(trial);
        grad.swap(trial_grad);
        energy = trial_energy;
        step *= 1.5;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent at machine resolution: a stationary point for all practical purposes.
      result.converged = true;
      break;
    }
  }
  result.energy = energy;
  return result;
}

std::vector<Minimum> find_minima(const ScalarField& field, std::size_t n_starts, const StartSampler& sampler,
                                 double merge_tol, const FlowOptions& options) {
  if (n_starts < 1) throw Error(ErrorCode::InvalidArgument, "find_minima needs at least one start");
  std::vector<Minimum> minima;
  for (std::size_t s = 0; s < n_starts; ++s) {
    const FlowResult flow = gradient_flow(field, sampler(s), options);
    bool merged = false;
    for (auto& m : minima) {
      if (distance(m.point, flow.point) < merge_tol) {
        if (flow.energy < m.energy) m = Minimum{flow.point, flow.energy};
        merged = true;
        break;
      }
    }
    if (!merged) minima.push_back(Minimum{flow.point, flow.energy});
  }
  std::stable_sort(minima.begin(), minima.end(),
                   [](const Minimum& a, const Minimum& b) { return a.energy < b.energy; });
  return minima;
}

std::optional<std::size_t> assign_to_minimum(std::span<const double> point, const std::vector<Minimum>& minima,
                                             double merge_tol) {
  std::optional<std::size_t> best;
  double best_dist = merge_tol;
  for (std::size_t i = 0; i < minima.size(); ++i) {
    const double dist = distance(point, minima[i].point);
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  return best;
}

std::vector<std::vector<double>> sample_stationary(const sde::SdeSystem& prior, std::size_t position_dim,
                                                   const SamplingOptions& options) {
  if (!(options.dt > 0.0) || options.thin < 1) throw Error(ErrorCode::InvalidArgument, "bad sampling options");
  RngStream rng(options.seed, kSamplingStream);
  const double scale = std::sqrt(options.dt);
  const double g = prior.diffusion;
  std::vector<double> z(prior.state_dim, 0.0), drift(prior.state_dim), dw(prior.state_dim, 0.0);
  const std::span<const double> g_span(&g, 1);
  auto advance = [&] {
    prior.drift(z, 0.0, drift);
    for (std::size_t i = 0; i < prior.noise_dim; ++i) dw[prior.noise_offset + i] = scale * rng.normal();
    sde::euler_maruyama_step(z, drift, g_span, dw, options.dt, z);
  };
  for (std::size_t k = 0; k < options.burn_in; ++k) advance();
  std::vector<std::vector<double>> samples;
  samples.reserve(options.n_samples);
  for (std::size_t n = 0; n < options.n_samples; ++n) {
    for (std::size_t k = 0; k < options.thin; ++k) advance();
    samples.emplace_back(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(position_dim));
  }
  return samples;
}

SamplingResult weights_sampling(const sde::SdeSystem& prior, std::size_t position_dim, const ScalarField& field,
                                const std::vector<Minimum>& minima, const SamplingOptions& options,
                                double merge_tol, const FlowOptions& flow) {
  if (minima.empty()) throw Error(ErrorCode::InvalidArgument, "no minima to assign samples to");
  SamplingResult result;
  result.samples = sample_stationary(prior, position_dim, options);
  std::vector<std::size_t> counts(minima.size(), 0);
  for (const auto& sample : result.samples) {
    const FlowResult end = gradient_flow(field, sample, flow);
    if (auto idx = assign_to_minimum(end.point, minima, merge_tol)) {
      ++counts[*idx];
    } else {
      ++result.unassigned;
    }
  }
  const std::size_t assigned = result.samples.size() - result.unassigned;
  if (assigned == 0) throw Error(ErrorCode::UnassignedSample, "no stationary sample reached a known minimum");
  for (std::size_t c : counts) result.weights.push_back(static_cast<double>(c) / static_cast<double>(assigned));
  return result;
}

SamplingResult weights_sampling(const model::NldModel& model, const std::vector<Minimum>& minima,
                                const SamplingOptions& options, double merge_tol, const FlowOptions& flow) {
  return weights_sampling(model.prior_system(), model.latent_dim(), energy_field(model), minima, options,
                          merge_tol, flow);
}

std::vector<double> weights_zeroth(std::span<const double> energies, double beta) {
  if (energies.empty()) throw Error(ErrorCode::InvalidArgument, "no minima");
  std::vector<double> log_w;
  for (double e : energies) log_w.push_back(-beta * e);
  return normalize_log_weights(log_w);
}

std::vector<double> weights_second(std::span<const double> energies, const std::vector<Eigen::MatrixXd>& hessians,
                                   double beta) {
  if (energies.empty()) throw Error(ErrorCode::InvalidArgument, "no minima");
  if (hessians.size() != energies.size()) throw Error(ErrorCode::LengthMismatch, "one Hessian per minimum");
  std::vector<double> log_w;
  for (std::size_t i = 0; i < energies.size(); ++i) {
    const Eigen::MatrixXd& h = hessians[i];
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (h.rows() == 0 || llt.info() != Eigen::Success) {
      throw Error(ErrorCode::NonPositiveDefiniteHessian,
                  "Hessian at minimum " + std::to_string(i) + " is not positive definite");
    }
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double d = static_cast<double>(h.rows());
    log_w.push_back(-beta * energies[i] + 0.5 * d * std::log(2.0 * std::numbers::pi / beta) - 0.5 * log_det);
  }
  return normalize_log_weights(log_w);
}

Eigen::MatrixXd field_hessian(const ScalarField& field, std::span<const double> z, double h) {
  return ad::hessian_fd([&field](std::span<const double> x) { return field.gradient(x); }, z, h);
}

double l1_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(ErrorCode::LengthMismatch, "probability vectors differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return s;
}

std::vector<double> WellReport::energies() const {
  std::vector<double> e;
  for (const auto& m : minima) e.push_back(m.energy);
  return e;
}

json WellReport::to_json() const {
  json j;
  j["beta"] = beta;
  j["n_minima"] = minima.size();
  j["minima"] = json::array();
  j["energies"] = energies();
  j["hessians"] = json::array();
  for (std::size_t i = 0; i < minima.size(); ++i) {
    j["minima"].push_back(minima[i].point);
    json rows = json::array();
    if (i < hessians.size()) {
      for (Eigen::Index r = 0; r < hessians[i].rows(); ++r) {
        std::vector<double> row(hessians[i].cols());
        for (Eigen::Index c = 0; c < hessians[i].cols(); ++c) row[c] = hessians[i](r, c);
        rows.push_back(row);
      }
    }
    j["hessians"].push_back(rows);
  }
  j["weights_sampling"] = weights_sampling;
  j["weights_zeroth"] = weights_zeroth;
  j["weights_second"] = weights_second;
  j["unassigned_samples"] = unassigned_samples;
  j["discarded_stationary_points"] = discarded_stationary_points;
  j["nonconverged_flows"] = nonconverged_flows;
  return j;
}

WellReport analyze(const model::NldModel& model, const AnalysisOptions& options) {
  const ScalarField field = energy_field(model);
  const auto samples = sample_stationary(model.prior_system(), model.latent_dim(), options.sampling);
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "analysis needs at least one stationary sample");

  WellReport report;
  report.beta = model.beta();
  const std::size_t n_starts = std::max<std::size_t>(1, options.n_starts);
  std::vector<Minimum> candidates = find_minima(
      field, n_starts,
      [&](std::size_t i) {
        const std::size_t stride = std::max<std::size_t>(1, samples.size() / n_starts);
        return samples[(i * stride) % samples.size()];
      },
      options.merge_tol, options.flow);

  for (auto& m : candidates) {
    Eigen::MatrixXd h = field_hessian(field, m.point);
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) {
      ++report.discarded_stationary_points;
      continue;
    }
    report.minima.push_back(std::move(m));
    report.hessians.push_back(std::move(h));
  }
  if (report.minima.empty()) throw Error(ErrorCode::NonPositiveDefiniteHessian, "no flow endpoint is a strict minimum");

  std::vector<std::size_t> counts(report.minima.size(), 0);
  for (const auto& sample : samples) {
    const FlowResult end = gradient_flow(field, sample, options.flow);
    if (!end.converged) ++report.nonconverged_flows;
    if (auto idx = assign_to_minimum(end.point, report.minima, options.merge_tol)) {
      ++counts[*idx];
    } else {
      ++report.unassigned_samples;
    }
  }
  const std::size_t assigned = samples.size() - report.unassigned_samples;
  if (assigned == 0) throw Error(ErrorCode::UnassignedSample, "no stationary sample reached a known minimum");
  for (std::size_t c : counts) {
    report.weights_sampling.push_back(static_cast<double>(c) / static_cast<double>(assigned));
  }
  const auto energies = report.energies();
  report.weights_zeroth = weights_zeroth(energies, report.beta);
  report.weights_second = weights_second(energies, report.hessians, report.beta);
  return report;
}

}  // namespace nld::analysis
