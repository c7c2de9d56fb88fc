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

#include "sde/sde.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace nld::sde {

void SdeConfig::validate() const {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  if (n_steps < 1) throw Error(ErrorCode::InvalidArgument, "n_steps must be at least 1");
}

WienerPath sample_wiener(const SdeConfig& config, std::size_t noise_dim, std::uint64_t seed) {
  config.validate();
  if (noise_dim < 1) throw Error(ErrorCode::InvalidArgument, "noise_dim must be at least 1");
  WienerPath path{config.n_steps, noise_dim, seed, {}};
  path.increments.resize(config.n_steps * noise_dim);
  RngStream rng(seed, 0x57494e4552ULL);  // "WINER" stream tag
  const double scale = std::sqrt(config.dt);
  for (double& dw : path.increments) dw = scale * rng.normal();
  return path;
}

WienerPath zero_wiener(const SdeConfig& config, std::size_t noise_dim) {
  config.validate();
  return WienerPath{config.n_steps, noise_dim, 0, std::vector<double>(config.n_steps * noise_dim, 0.0)};
}

void euler_maruyama_step(std::span<const double> z, std::span<const double> drift,
                         std::span<const double> diffusion, std::span<const double> dw, double dt,
                         std::span<double> out) {
  const std::size_t n = z.size();
  if (drift.size() != n || dw.size() != n || out.size() != n ||
      (diffusion.size() != 1 && diffusion.size() != n)) {
    throw Error(ErrorCode::ShapeMismatch, "Euler-Maruyama operand sizes");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double g = diffusion.size() == 1 ? diffusion[0] : diffusion[i];
    out[i] = z[i] + drift[i] * dt + g * dw[i];
    if (!std::isfinite(out[i])) throw Error(ErrorCode::NonFinite, "Euler-Maruyama step produced a non-finite state");
  }
}

namespace {

void check_system(const SdeSystem& system, std::span<const double> z0, const SdeConfig& config,
                  const WienerPath& wiener) {
  config.validate();
  if (z0.size() != system.state_dim) throw Error(ErrorCode::ShapeMismatch, "initial state dimension");
  if (system.noise_offset + system.noise_dim > system.state_dim) {
    throw Error(ErrorCode::ShapeMismatch, "noise block exceeds state");
  }
  if (wiener.noise_dim != system.noise_dim || wiener.n_steps < config.n_steps) {
    throw Error(ErrorCode::ShapeMismatch, "Wiener path does not cover the simulation");
  }
}

// Shared integrator; `control` may be empty (prior).
LatentPath integrate(const SdeSystem& system, const ControlFn* control, std::span<const double> z0,
                     const SdeConfig& config, const WienerPath& wiener) {
  const std::size_t n = system.state_dim;
  LatentPath path;
  path.times.reserve(config.n_steps + 1);
  path.states.reserve(config.n_steps + 1);
  path.times.push_back(0.0);
  path.states.emplace_back(z0.begin(), z0.end());

  std::vector<double> drift(n), dw(n, 0.0), next(n), f(system.noise_dim);
  const double diffusion[1] = {system.diffusion};
  for (std::size_t k = 0; k < config.n_steps; ++k) {
    const std::vector<double>& z = path.states.back();
    const double t = static_cast<double>(k) * config.dt;
    system.drift(z, t, drift);
    if (control != nullptr) {
      (*control)(z, t, k, f);
      double norm = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) {
        drift[system.noise_offset + i] += f[i];
        const double u = f[i] / system.diffusion;
        norm += u * u;
      }
      path.control_norms.push_back(norm);
    }
    const auto increment = wiener.step(k);
    for (std::size_t i = 0; i < system.noise_dim; ++i) dw[system.noise_offset + i] = increment[i];
    // Components outside the noise block get an exact deterministic update.
    for (std::size_t i = 0; i < n; ++i) {
      const bool noisy = i >= system.noise_offset && i < system.noise_offset + system.noise_dim;
      next[i] = noisy ? z[i] + drift[i] * config.dt + diffusion[0] * dw[i] : z[i] + drift[i] * config.dt;
      if (!std::isfinite(next[i])) {
        throw Error(ErrorCode::NonFinite, "state became non-finite at step " + std::to_string(k));
      }
    }
    path.times.push_back(static_cast<double>(k + 1) * config.dt);
    path.states.push_back(next);
  }
  return path;
}

}  // namespace

LatentPath simulate_prior(const SdeSystem& system, std::span<const double> z0, const SdeConfig& config,
                          const WienerPath& wiener) {
  check_system(system, z0, config, wiener);
  return integrate(system, nullptr, z0, config, wiener);
}

LatentPath simulate_prior(const SdeSystem& system, std::span<const double> z0, const SdeConfig& config,
                          std::uint64_t seed) {
  return simulate_prior(system, z0, config, sample_wiener(config, std::max<std::size_t>(system.noise_dim, 1), seed));
}

PosteriorResult simulate_posterior(const SdeSystem& system, const ControlFn& control,
                                   std::span<const double> z0, const SdeConfig& config,
                                   const WienerPath& wiener) {
  check_system(system, z0, config, wiener);
  if (!(system.diffusion > 1e-12)) {
    throw Error(ErrorCode::SingularDiffusion, "posterior KL undefined for diffusion <= 1e-12");
  }
  PosteriorResult result;
  result.path = integrate(system, &control, z0, config, wiener);
  result.kl = kl_path_integral(result.path.control_norms, config.dt);
  return result;
}

double kl_path_integral(std::span<const double> control_norms, double dt) {
  double total = 0.0;
  for (double norm : control_norms) {
    if (norm < 0.0) throw Error(ErrorCode::InvalidArgument, "control norms must be nonnegative");
    total += norm;
  }
  return 0.5 * total * dt;
}

void write_path_csv(const LatentPath& path, std::size_t position_dim, std::ostream& out) {
  const std::size_t state_dim = path.states.empty() ? position_dim : path.states.front().size();
  out << "t";
  for (std::size_t i = 0; i < position_dim; ++i) out << ",z_" << (i + 1);
  for (std::size_t i = position_dim; i < state_dim; ++i) out << ",p_" << (i - position_dim + 1);
  out << '\n';
  out.precision(17);
  for (std::size_t k = 0; k < path.states.size(); ++k) {
    out << path.times[k];
    for (double v : path.states[k]) out << ',' << v;
    out << '\n';
  }
}

}  // namespace nld::sde
