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
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace nld::model {

enum class Mode { Overdamped, Underdamped, NsdeBaseline };

std::string to_string(Mode mode);
/// Accepts "overdamped", "underdamped", "nsde-baseline"; throws Config.
Mode parse_mode(std::string_view text);

/// Friction, inverse temperature and diagonal mass. Trainable constants are
/// stored as softplus pre-images.
struct DynamicsConstants {
  double gamma = 1.0;
  double beta = 1.0;
  std::vector<double> mass;  // empty = identity
  bool train_gamma = true;
  bool train_beta = true;
  bool train_mass = true;
};

struct ModelConfig {
  Mode mode = Mode::Overdamped;
  std::size_t latent_dim = 2;
  std::size_t obs_dim = 15;
  std::size_t encoder_hidden = 32;
  std::size_t context_dim = 16;
  std::vector<std::size_t> energy_hidden{64, 64};
  std::vector<std::size_t> control_hidden{64};
  std::vector<std::size_t> decoder_hidden{64};
  std::vector<std::size_t> drift_hidden{64, 64};  // free drift of the baseline
  /// Feed the raw time t to the posterior control network.
  bool control_time_input = true;
  /// Quadratic term kappa/2 |z|^2 added to the network energy so exp(-beta E)
  /// is normalisable (a tanh network is bounded at infinity).
  double confinement = 0.05;
  DynamicsConstants constants;

  std::size_t state_dim() const { return mode == Mode::Underdamped ? 2 * latent_dim : latent_dim; }
  void validate() const;
};

struct TrainConfig {
  double dt = 0.05;
  double lr = 2e-3;
  /// Learning rate of the last epoch; the rate decays geometrically from
  /// `lr`. Negative keeps it constant.
  double lr_final = 1e-4;
  std::size_t epochs = 300;
  std::size_t warmup_epochs = 10;
  double clip_norm = 10.0;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  double max_skip_fraction = 0.1;

  void validate() const;
};

/// Training config JSON: model architecture, dynamics constants and
/// optimiser settings in one object.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const ModelConfig& config);
ModelConfig parse_model_config(const nlohmann::json& j);

}  // namespace nld::model
