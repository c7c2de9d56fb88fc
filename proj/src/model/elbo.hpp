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
#include <vector>

#include "common/rng.hpp"
#include "model/model.hpp"

namespace nld::model {

/// Per-sequence averages; elbo = recon_loglik - kl_path - kl_z0.
struct ElboBreakdown {
  double elbo = 0.0;
  double recon_loglik = 0.0;
  double kl_path = 0.0;
  double kl_z0 = 0.0;
};

/// Reparameterisation noise for one batch: eps for z0 (B x state_dim) and one
/// Wiener increment block (B x noise_dim, variance dt) per SDE step.
struct ElboNoise {
  Tensor z0;
  std::vector<Tensor> increments;
};

ElboNoise sample_elbo_noise(std::size_t batch, std::size_t length, std::size_t state_dim,
                            std::size_t noise_dim, double dt, RngStream& rng);
ElboNoise zero_elbo_noise(std::size_t batch, std::size_t length, std::size_t state_dim,
                          std::size_t noise_dim);

struct TapedElbo {
  /// -(recon - kl_weight * (kl_path + kl_z0)) averaged over the batch.
  Var loss;
  ElboBreakdown breakdown;
};

/// ELBO of a batch of equal-length sequences on the model's tape. The
/// posterior runs Euler-Maruyama with the given noise and step `dt`; context
/// c_k drives step k -> k+1 and every observation x_k is scored against
/// decode(z_k).
TapedElbo taped_elbo(const TapedModel& model, const std::vector<const Observations*>& batch, double dt,
                     const ElboNoise& noise, double kl_weight = 1.0);

/// Single-sequence ELBO with noise drawn from `seed`.
ElboBreakdown elbo(const NldModel& model, const Observations& observations, double dt, std::uint64_t seed);

}  // namespace nld::model
