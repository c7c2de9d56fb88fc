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

#include "model/model.hpp"

#include <cmath>
#include <fstream>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace nld::model {

using nlohmann::json;

namespace {

constexpr std::uint64_t kInitStream = 0x4e4c44494e4954ULL;

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

}  // namespace

NldModel::NldModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  RngStream rng(seed, kInitStream);
  const std::size_t d = config_.latent_dim;
  const std::size_t sd = config_.state_dim();
  if (has_energy()) {
    energy_ = nn::Mlp::create(params_, "energy", layer_sizes(d, config_.energy_hidden, 1), rng);
  } else {
    drift_ = nn::Mlp::create(params_, "drift", layer_sizes(d + 1, config_.drift_hidden, d), rng);
  }
  const std::size_t control_in = sd + config_.context_dim + (config_.control_time_input ? 1 : 0);
  control_ = nn::Mlp::create(params_, "control", layer_sizes(control_in, config_.control_hidden, d), rng);
  decoder_ = nn::Mlp::create(params_, "decoder", layer_sizes(d, config_.decoder_hidden, config_.obs_dim), rng);
  encoder_ = nn::Gru::create(params_, "encoder.gru", config_.obs_dim, config_.encoder_hidden, rng);
  context_proj_ = nn::Linear::create(params_, "encoder.proj", config_.encoder_hidden, config_.context_dim, rng);
  z0_head_ = nn::Linear::create(params_, "z0_head", config_.context_dim, 2 * sd, rng);
  obs_log_var_ = params_.add("obs_log_var", Tensor(1, config_.obs_dim, 0.0));

  const auto& c = config_.constants;
  raw_gamma_ = params_.add("constants.gamma", Tensor::scalar(ad::softplus_inverse(c.gamma)));
  raw_beta_ = params_.add("constants.beta", Tensor::scalar(ad::softplus_inverse(c.beta)));
  Tensor raw_mass(1, d);
  for (std::size_t i = 0; i < d; ++i) raw_mass[i] = ad::softplus_inverse(c.mass.empty() ? 1.0 : c.mass[i]);
  raw_mass_ = params_.add("constants.M", std::move(raw_mass));
}

std::vector<bool> NldModel::frozen_mask() const {
  std::vector<bool> frozen(params_.size(), false);
  const auto& c = config_.constants;
  frozen[raw_gamma_.index] = !c.train_gamma;
  frozen[raw_beta_.index] = !c.train_beta;
  frozen[raw_mass_.index] = !c.train_mass || mode() != Mode::Underdamped;
  return frozen;
}

double NldModel::gamma() const { return ad::softplus_value(params_[raw_gamma_][0]); }
double NldModel::beta() const { return ad::softplus_value(params_[raw_beta_][0]); }

std::vector<double> NldModel::mass() const {
  std::vector<double> m;
  for (double raw : params_[raw_mass_].values()) m.push_back(ad::softplus_value(raw));
  return m;
}

double NldModel::diffusion() const {
  if (mode() == Mode::Underdamped) return std::sqrt(2.0 * gamma() / beta());
  return std::sqrt(2.0 / (beta() * gamma()));
}

double NldModel::energy_and_gradient(std::span<const double> z, std::span<double> gradient,
                                     bool include_bias) const {
  if (!has_energy()) throw Error(ErrorCode::InvalidArgument, "the free-drift baseline has no energy");
  double value = energy_.value_and_gradient(params_, z, gradient, include_bias);
  const double kappa = config_.confinement;
  double sq = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    sq += z[i] * z[i];
    gradient[i] += kappa * z[i];
  }
  return value + 0.5 * kappa * sq;
}

double NldModel::energy(std::span<const double> z, bool include_bias) const {
  std::vector<double> scratch(z.size());
  return energy_and_gradient(z, scratch, include_bias);
}

void NldModel::energy_gradient(std::span<const double> z, std::span<double> gradient) const {
  energy_and_gradient(z, gradient, false);
}

void NldModel::prior_drift(std::span<const double> state, double t, std::span<double> drift) const {
  const std::size_t d = latent_dim();
  if (state.size() != state_dim() || drift.size() != state_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "prior drift state dimension");
  }
  switch (mode()) {
    case Mode::Overdamped: {
      energy_gradient(state, drift);
      const double inv_gamma = 1.0 / gamma();
      for (double& v : drift) v = -v * inv_gamma;
      break;
    }
    case Mode::Underdamped: {
      const std::vector<double> m = mass();
      const double g = gamma();
      std::span<double> dq = drift.subspan(0, d), dp = drift.subspan(d, d);
      energy_gradient(state.subspan(0, d), dp);
      for (std::size_t i = 0; i < d; ++i) {
        const double velocity = state[d + i] / m[i];
        dq[i] = velocity;
        dp[i] = -dp[i] - g * velocity;
      }
      break;
    }
    case Mode::NsdeBaseline: {
      std::vector<double> input(state.begin(), state.end());
      input.push_back(t);
      const std::vector<double> h = drift_.eval(params_, input);
      std::copy(h.begin(), h.end(), drift.begin());
      break;
    }
  }
}

std::vector<double> NldModel::control_input(std::span<const double> state, double t,
                                            std::span<const double> context) const {
  std::vector<double> input(state.begin(), state.end());
  input.insert(input.end(), context.begin(), context.end());
  if (config_.control_time_input) input.push_back(t);
  return input;
}

std::vector<double> NldModel::control(std::span<const double> state, double t,
                                      std::span<const double> context) const {
  return control_.eval(params_, control_input(state, t, context));
}

std::vector<double> NldModel::decode(std::span<const double> state) const {
  return decoder_.eval(params_, state.subspan(0, latent_dim()));
}

std::vector<std::vector<double>> NldModel::encode(const Observations& observations) const {
  std::vector<std::vector<double>> contexts;
  contexts.reserve(observations.size());
  std::vector<double> hidden(config_.encoder_hidden, 0.0);
  for (const auto& x : observations) {
    hidden = encoder_.step(params_, hidden, x);
    contexts.push_back(context_proj_.eval(params_, hidden));
  }
  return contexts;
}

std::pair<std::vector<double>, std::vector<double>> NldModel::initial_posterior(
    std::span<const double> context0) const {
  const std::vector<double> out = z0_head_.eval(params_, context0);
  const std::size_t sd = state_dim();
  return {std::vector<double>(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(sd)),
          std::vector<double>(out.begin() + static_cast<std::ptrdiff_t>(sd), out.end())};
}

sde::SdeSystem NldModel::prior_system() const {
  sde::SdeSystem system;
  system.state_dim = state_dim();
  system.noise_offset = noise_offset();
  system.noise_dim = latent_dim();
  system.diffusion = diffusion();
  system.drift = [this](std::span<const double> z, double t, std::span<double> out) { prior_drift(z, t, out); };
  return system;
}

sde::ControlFn NldModel::control_fn(const std::vector<std::vector<double>>& contexts) const {
  return [this, &contexts](std::span<const double> z, double t, std::size_t k, std::span<double> out) {
    const std::vector<double> f = control(z, t, contexts.at(k));
    std::copy(f.begin(), f.end(), out.begin());
  };
}

void NldModel::shift_energy(double delta) {
  if (!has_energy()) throw Error(ErrorCode::InvalidArgument, "the free-drift baseline has no energy");
  params_[energy_.output_bias()][0] += delta;
}

TapedModel::TapedModel(const NldModel& model, ad::Tape& tape) : model_(&model), bound_(tape, model.params()) {
  gamma_ = ad::softplus(bound_[model.raw_gamma()]);
  beta_ = ad::softplus(bound_[model.raw_beta()]);
  inverse_mass_ = ad::div(tape.constant(Tensor::scalar(1.0)), ad::softplus(bound_[model.raw_mass()]));
  Var two = tape.constant(Tensor::scalar(2.0));
  if (model.mode() == Mode::Underdamped) {
    diffusion_ = ad::sqrt(ad::div(two * gamma_, beta_));
  } else {
    diffusion_ = ad::sqrt(ad::div(two, beta_ * gamma_));
  }
}

Var TapedModel::energy_gradient(Var positions) const {
  Var grad = model_->energy_net().input_gradient(bound_, positions);
  const double kappa = model_->config().confinement;
  if (kappa != 0.0) grad = grad + ad::scale(positions, kappa);
  return grad;
}

Var TapedModel::prior_drift(Var state, double t) const {
  const std::size_t d = model_->latent_dim();
  switch (model_->mode()) {
    case Mode::Overdamped:
      return ad::neg(ad::div(energy_gradient(state), gamma_));
    case Mode::Underdamped: {
      Var q = ad::slice_cols(state, 0, d);
      Var p = ad::slice_cols(state, d, 2 * d);
      Var velocity = p * inverse_mass_;
      Var dp = ad::neg(energy_gradient(q)) - gamma_ * velocity;
      return ad::concat_cols({velocity, dp});
    }
    case Mode::NsdeBaseline: {
      Var time = tape().constant(Tensor(state.rows(), 1, t));
      return model_->drift_net().forward(bound_, ad::concat_cols({state, time}));
    }
  }
  return state;
}

Var TapedModel::control(Var state, double t, Var context) const {
  std::vector<Var> parts{state, context};
  if (model_->config().control_time_input) parts.push_back(tape().constant(Tensor(state.rows(), 1, t)));
  return model_->control_net().forward(bound_, ad::concat_cols(parts));
}

Var TapedModel::decode(Var positions) const {
  return model_->decoder_net().forward(bound_, positions);
}

json checkpoint_json(const NldModel& model) {
  json j;
  j["format"] = "nld-checkpoint";
  j["version"] = 1;
  j["model"] = to_json(model.config());
  json params = json::object();
  const auto& store = model.params();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Tensor& t = store.at(i);
    params[store.name(i)] = {{"shape", {t.rows(), t.cols()}}, {"data", t.storage()}};
  }
  j["params"] = std::move(params);
  return j;
}

NldModel model_from_json(const json& j) {
  try {
    if (j.value("format", std::string{}) != "nld-checkpoint") {
      throw Error(ErrorCode::Io, "not an nld checkpoint");
    }
    NldModel model(parse_model_config(j.at("model")), 0);
    const json& params = j.at("params");
    auto& store = model.params();
    for (std::size_t i = 0; i < store.size(); ++i) {
      const std::string& name = store.name(i);
      if (!params.contains(name)) throw Error(ErrorCode::Io, "checkpoint lacks tensor '" + name + "'");
      const json& entry = params.at(name);
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      auto data = entry.at("data").get<std::vector<double>>();
      Tensor& target = store.at(i);
      if (shape.size() != 2 || shape[0] != target.rows() || shape[1] != target.cols()) {
        throw Error(ErrorCode::Io, "tensor '" + name + "' has the wrong shape");
      }
      target = Tensor(shape[0], shape[1], std::move(data));
    }
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const NldModel& model, const std::filesystem::path& path, const json& extra) {
  json j = checkpoint_json(model);
  for (const auto& item : extra.items()) j[item.key()] = item.value();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

NldModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, "checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace nld::model
