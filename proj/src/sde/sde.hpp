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
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace nld::sde {

struct SdeConfig {
  double dt = 0.05;
  std::size_t n_steps = 1;
  std::size_t latent_dim = 1;

  double final_time() const { return dt * static_cast<double>(n_steps); }
  void validate() const;
};

/// Increments dW_k ~ N(0, dt I), row-major n_steps x noise_dim.
struct WienerPath {
  std::size_t n_steps = 0;
  std::size_t noise_dim = 0;
  std::uint64_t seed = 0;
  std::vector<double> increments;

  std::span<const double> step(std::size_t k) const {
    return std::span<const double>(increments).subspan(k * noise_dim, noise_dim);
  }
};

/// Times t_0..t_n, states z_0..z_n and the per-step squared control norms
/// |u_k|^2 (k = 0..n-1; empty for prior paths).
struct LatentPath {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::vector<double> control_norms;
};

/// An SDE with constant scalar diffusion acting on the contiguous block
/// [noise_offset, noise_offset + noise_dim) of the state; the remaining
/// components evolve deterministically.
struct SdeSystem {
  std::size_t state_dim = 0;
  std::size_t noise_offset = 0;
  std::size_t noise_dim = 0;
  double diffusion = 0.0;
  std::function<void(std::span<const double> z, double t, std::span<double> drift)> drift;
};

/// Posterior control f_phi(z, t, c_k) on the noise block; `step` indexes the
/// context path.
using ControlFn =
    std::function<void(std::span<const double> z, double t, std::size_t step, std::span<double> control)>;

struct PosteriorResult {
  LatentPath path;
  double kl = 0.0;
};

WienerPath sample_wiener(const SdeConfig& config, std::size_t noise_dim, std::uint64_t seed);
WienerPath zero_wiener(const SdeConfig& config, std::size_t noise_dim);

/// out = z + drift * dt + diffusion * dW. `diffusion` has one entry (scalar)
/// or one per component. Throws NonFinite if the result is not finite.
void euler_maruyama_step(std::span<const double> z, std::span<const double> drift,
                         std::span<const double> diffusion, std::span<const double> dw, double dt,
                         std::span<double> out);

LatentPath simulate_prior(const SdeSystem& system, std::span<const double> z0, const SdeConfig& config,
                          const WienerPath& wiener);
LatentPath simulate_prior(const SdeSystem& system, std::span<const double> z0, const SdeConfig& config,
                          std::uint64_t seed);

/// Posterior drift = prior drift + control on the noise block. The Girsanov
/// control is u_k = control / diffusion and the returned KL is the left
/// Riemann sum 0.5 * sum_k |u_k|^2 dt. Throws SingularDiffusion when the
/// diffusion is at most 1e-12.
PosteriorResult simulate_posterior(const SdeSystem& system, const ControlFn& control,
                                   std::span<const double> z0, const SdeConfig& config,
                                   const WienerPath& wiener);

/// 0.5 * sum_k norms[k] * dt.
double kl_path_integral(std::span<const double> control_norms, double dt);

/// CSV with header t,z_1..z_d[,p_1..p_d]; `position_dim` < state dim marks the
/// trailing block as momentum.
void write_path_csv(const LatentPath& path, std::size_t position_dim, std::ostream& out);

}  // namespace nld::sde
