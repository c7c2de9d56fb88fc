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
#include <filesystem>
#include <span>
#include <vector>

#include "model/config.hpp"
#include "nn/layers.hpp"
#include "sde/sde.hpp"

namespace nld::model {

using ad::Tensor;
using ad::Var;
using Observations = std::vector<std::vector<double>>;

/// Variational autoencoder with a Langevin (or free-drift) latent prior.
///
/// Prior drift by mode, for state z (overdamped) or (q, p) (underdamped):
///   overdamped:    -grad E(z) / gamma,                 noise sqrt(2 / (beta gamma)) on z
///   underdamped:   (p / M, -grad E(q) - gamma p / M),  noise sqrt(2 gamma / beta) on p
///   nsde-baseline: h(z, t),                            noise sqrt(2 / (beta gamma)) on z
/// with E(z) = network(z) + confinement / 2 |z|^2. The posterior adds the
/// control network f(z, t, c_t) on the noisy block; the decoder reads the
/// position block only.
class NldModel {
 public:
  NldModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  Mode mode() const { return config_.mode; }
  std::size_t latent_dim() const { return config_.latent_dim; }
  std::size_t state_dim() const { return config_.state_dim(); }
  std::size_t noise_offset() const { return mode() == Mode::Underdamped ? latent_dim() : 0; }
  bool has_energy() const { return mode() != Mode::NsdeBaseline; }

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  /// True for tensors the optimiser must not move (fixed constants).
  std::vector<bool> frozen_mask() const;

  double gamma() const;
  double beta() const;
  std::vector<double> mass() const;
  double diffusion() const;

  /// Energy at a position. `include_bias` = false drops the network's output
  /// bias, a pure additive constant with no effect on the dynamics.
  double energy(std::span<const double> z, bool include_bias = true) const;
  void energy_gradient(std::span<const double> z, std::span<double> gradient) const;
  /// Both at once; the bias convention matches energy().
  double energy_and_gradient(std::span<const double> z, std::span<double> gradient,
                             bool include_bias = true) const;

  void prior_drift(std::span<const double> state, double t, std::span<double> drift) const;
  std::vector<double> control(std::span<const double> state, double t, std::span<const double> context) const;
  std::vector<double> decode(std::span<const double> state) const;
  /// Online encoder: context k depends on observations 0..k only.
  std::vector<std::vector<double>> encode(const Observations& observations) const;
  /// Mean and log standard deviation of the initial-state posterior.
  std::pair<std::vector<double>, std::vector<double>> initial_posterior(std::span<const double> context0) const;

  sde::SdeSystem prior_system() const;
  sde::ControlFn control_fn(const std::vector<std::vector<double>>& contexts) const;

  /// Adds `delta` to the energy network's output bias.
  void shift_energy(double delta);

  // Component access for the taped view and checkpoints.
  const nn::Mlp& energy_net() const { return energy_; }
  const nn::Mlp& drift_net() const { return drift_; }
  const nn::Mlp& control_net() const { return control_; }
  const nn::Mlp& decoder_net() const { return decoder_; }
  const nn::Gru& encoder() const { return encoder_; }
  const nn::Linear& context_projection() const { return context_proj_; }
  const nn::Linear& initial_head() const { return z0_head_; }
  nn::ParamId obs_log_var() const { return obs_log_var_; }
  nn::ParamId raw_gamma() const { return raw_gamma_; }
  nn::ParamId raw_beta() const { return raw_beta_; }
  nn::ParamId raw_mass() const { return raw_mass_; }

 private:
  std::vector<double> control_input(std::span<const double> state, double t,
                                    std::span<const double> context) const;

  ModelConfig config_;
  nn::ParamStore params_;
  nn::Mlp energy_;
  nn::Mlp drift_;
  nn::Mlp control_;
  nn::Mlp decoder_;
  nn::Gru encoder_;
  nn::Linear context_proj_;
  nn::Linear z0_head_;
  nn::ParamId obs_log_var_;
  nn::ParamId raw_gamma_;
  nn::ParamId raw_beta_;
  nn::ParamId raw_mass_;
};

/// The model's leaves on one tape plus the derived constants.
class TapedModel {
 public:
  TapedModel(const NldModel& model, ad::Tape& tape);

  const NldModel& model() const { return *model_; }
  ad::Tape& tape() const { return bound_.tape(); }
  const nn::BoundParams& bound() const { return bound_; }

  Var gamma() const { return gamma_; }
  Var beta() const { return beta_; }
  Var inverse_mass() const { return inverse_mass_; }
  Var diffusion() const { return diffusion_; }

  /// Batched energy gradient (B x d) -> (B x d).
  Var energy_gradient(Var positions) const;
  Var prior_drift(Var state, double t) const;
  Var control(Var state, double t, Var context) const;
  Var decode(Var positions) const;

 private:
  const NldModel* model_;
  nn::BoundParams bound_;
  Var gamma_, beta_, inverse_mass_, diffusion_;
};

/// Checkpoint JSON: config + one {"shape","data"} entry per named tensor.
void save_checkpoint(const NldModel& model, const std::filesystem::path& path,
                     const nlohmann::json& extra = nlohmann::json::object());
NldModel load_checkpoint(const std::filesystem::path& path);
nlohmann::json checkpoint_json(const NldModel& model);
NldModel model_from_json(const nlohmann::json& j);

}  // namespace nld::model
