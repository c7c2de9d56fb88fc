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

#include "model/elbo.hpp"

#include <cmath>
#include <numbers>

#include "common/error.hpp"

namespace nld::model {

namespace {

constexpr std::uint64_t kElboStream = 0x454c424f;

Tensor gaussian_block(std::size_t rows, std::size_t cols, double scale, RngStream& rng) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

/// Observations at step k of every sequence, one row each.
Tensor observation_rows(const std::vector<const Observations*>& batch, std::size_t k, std::size_t obs_dim) {
  Tensor x(batch.size(), obs_dim);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& row = (*batch[b])[k];
    if (row.size() != obs_dim) throw Error(ErrorCode::ShapeMismatch, "observation dimension differs from model");
    std::copy(row.begin(), row.end(), x.row_span(b).begin());
  }
  return x;
}

}  // namespace

ElboNoise sample_elbo_noise(std::size_t batch, std::size_t length, std::size_t state_dim,
                            std::size_t noise_dim, double dt, RngStream& rng) {
  ElboNoise noise;
  noise.z0 = gaussian_block(batch, state_dim, 1.0, rng);
  const double scale = std::sqrt(dt);
  for (std::size_t k = 0; k + 1 < length; ++k) {
    noise.increments.push_back(gaussian_block(batch, noise_dim, scale, rng));
  }
  return noise;
}

ElboNoise zero_elbo_noise(std::size_t batch, std::size_t length, std::size_t state_dim,
                          std::size_t noise_dim) {
  ElboNoise noise;
  noise.z0 = Tensor(batch, state_dim, 0.0);
  for (std::size_t k = 0; k + 1 < length; ++k) noise.increments.emplace_back(batch, noise_dim, 0.0);
  return noise;
}

TapedElbo taped_elbo(const TapedModel& taped, const std::vector<const Observations*>& batch, double dt,
                     const ElboNoise& noise, double kl_weight) {
  if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  const NldModel& model = taped.model();
  const ModelConfig& cfg = model.config();
  const std::size_t B = batch.size();
  const std::size_t L = batch.front()->size();
  if (L == 0) throw Error(ErrorCode::InvalidArgument, "sequences must be nonempty");
  for (const auto* seq : batch) {
    if (seq->size() != L) throw Error(ErrorCode::LengthMismatch, "batch sequences differ in length");
  }
  const std::size_t d = model.latent_dim();
  const std::size_t sd = model.state_dim();
  if (noise.z0.rows() != B || noise.z0.cols() != sd || noise.increments.size() + 1 != L) {
    throw Error(ErrorCode::ShapeMismatch, "noise does not match batch");
  }

  ad::Tape& tape = taped.tape();
  const nn::BoundParams& bound = taped.bound();

  // Online encoder.
  std::vector<Var> contexts;
  contexts.reserve(L);
  std::vector<Var> targets;
  targets.reserve(L);
  Var hidden = tape.constant(Tensor(B, cfg.encoder_hidden, 0.0));
  for (std::size_t k = 0; k < L; ++k) {
    Var x = tape.constant(observation_rows(batch, k, cfg.obs_dim));
    targets.push_back(x);
    hidden = model.encoder().step(bound, hidden, x);
    contexts.push_back(model.context_projection().forward(bound, hidden));
  }

  // Initial state.
  Var head = model.initial_head().forward(bound, contexts.front());
  Var mu = ad::slice_cols(head, 0, sd);
  Var log_sigma = ad::slice_cols(head, sd, 2 * sd);
  Var sigma = ad::exp(log_sigma);
  Var z = mu + sigma * tape.constant(noise.z0);
  Var kl_z0 = ad::scale(ad::sum(ad::add_scalar(ad::square(mu) + ad::square(sigma) - ad::scale(log_sigma, 2.0), -1.0)),
                        0.5);

  // Posterior path.
  Var g = taped.diffusion();
  std::vector<Var> positions{model.mode() == Mode::Underdamped ? ad::slice_cols(z, 0, d) : z};
  positions.reserve(L);
  Var kl_path = tape.constant(Tensor::scalar(0.0));
  for (std::size_t k = 0; k + 1 < L; ++k) {
    const double t = static_cast<double>(k) * dt;
    Var drift = taped.prior_drift(z, t);
    Var f = taped.control(z, t, contexts[k]);
    Var u = ad::div(f, g);
    kl_path = kl_path + ad::scale(ad::sum(ad::square(u)), 0.5 * dt);
    Var dw = tape.constant(noise.increments[k]);
    if (model.mode() == Mode::Underdamped) {
      Var q = ad::slice_cols(z, 0, d);
      Var p = ad::slice_cols(z, d, sd);
      Var q_next = q + ad::scale(ad::slice_cols(drift, 0, d), dt);
      Var p_next = p + ad::scale(ad::slice_cols(drift, d, sd) + f, dt) + g * dw;
      z = ad::concat_cols({q_next, p_next});
      positions.push_back(q_next);
    } else {
      z = z + ad::scale(drift + f, dt) + g * dw;
      positions.push_back(z);
    }
  }

  // Diagonal Gaussian likelihood of every observation.
  Var mean = taped.decode(ad::concat_rows(positions));
  Var target = ad::concat_rows(targets);
  Var log_var = bound[model.obs_log_var()];
  Var residual = target - mean;
  Var per_entry = ad::square(residual) * ad::exp(ad::neg(log_var)) + log_var;
  const double rows = static_cast<double>(B * L);
  Var recon = ad::add_scalar(ad::scale(ad::sum(per_entry), -0.5),
                             -0.5 * rows * static_cast<double>(cfg.obs_dim) * std::log(2.0 * std::numbers::pi));

  const double inv_b = 1.0 / static_cast<double>(B);
  TapedElbo out;
  out.loss = ad::scale(recon - ad::scale(kl_path + kl_z0, kl_weight), -inv_b);
  out.breakdown.recon_loglik = recon.scalar() * inv_b;
  out.breakdown.kl_path = kl_path.scalar() * inv_b;
  out.breakdown.kl_z0 = kl_z0.scalar() * inv_b;
  out.breakdown.elbo = out.breakdown.recon_loglik - out.breakdown.kl_path - out.breakdown.kl_z0;
  return out;
}

ElboBreakdown elbo(const NldModel& model, const Observations& observations, double dt, std::uint64_t seed) {
  RngStream rng(seed, kElboStream);
  const ElboNoise noise =
      sample_elbo_noise(1, observations.size(), model.state_dim(), model.latent_dim(), dt, rng);
  ad::Tape tape;
  TapedModel taped(model, tape);
  return taped_elbo(taped, {&observations}, dt, noise).breakdown;
}

}  // namespace nld::model
