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

#include "model/config.hpp"

#include <set>

#include "common/error.hpp"

namespace nld::model {

using nlohmann::json;

namespace {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw Error(ErrorCode::Config, "unknown key '" + item.key() + "' in " + where);
    }
  }
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Overdamped: return "overdamped";
    case Mode::Underdamped: return "underdamped";
    case Mode::NsdeBaseline: return "nsde-baseline";
  }
  return "overdamped";
}

Mode parse_mode(std::string_view text) {
  if (text == "overdamped") return Mode::Overdamped;
  if (text == "underdamped") return Mode::Underdamped;
  if (text == "nsde-baseline") return Mode::NsdeBaseline;
  throw Error(ErrorCode::Config, "unknown mode '" + std::string(text) +
                                     "' (expected overdamped, underdamped or nsde-baseline)");
}

void ModelConfig::validate() const {
  if (latent_dim < 1) throw Error(ErrorCode::Config, "latent_dim must be at least 1");
  if (obs_dim < 1) throw Error(ErrorCode::Config, "obs_dim must be at least 1");
  if (encoder_hidden < 1 || context_dim < 1) throw Error(ErrorCode::Config, "encoder sizes must be positive");
  if (!(constants.gamma > 0.0) || !(constants.beta > 0.0)) {
    throw Error(ErrorCode::Config, "gamma and beta must be positive");
  }
  if (!constants.mass.empty()) {
    if (constants.mass.size() != latent_dim) throw Error(ErrorCode::Config, "mass needs latent_dim entries");
    for (double m : constants.mass) {
      if (!(m > 0.0)) throw Error(ErrorCode::Config, "mass entries must be positive");
    }
  }
  if (!(confinement >= 0.0)) throw Error(ErrorCode::Config, "confinement must be nonnegative");
}

void TrainConfig::validate() const {
  if (!(dt > 0.0)) throw Error(ErrorCode::Config, "dt must be positive");
  if (!(lr >= 0.0)) throw Error(ErrorCode::Config, "lr must be nonnegative");
  if (batch_size < 1) throw Error(ErrorCode::Config, "batch_size must be at least 1");
  if (!(clip_norm > 0.0)) throw Error(ErrorCode::Config, "clip_norm must be positive");
}

ModelConfig parse_model_config(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "config must be a JSON object");
  ModelConfig m;
  if (j.contains("mode")) {
    if (!j.at("mode").is_string()) throw Error(ErrorCode::Config, "mode must be a string");
    m.mode = parse_mode(j.at("mode").get<std::string>());
  }
  read(j, "latent_dim", m.latent_dim);
  read(j, "obs_dim", m.obs_dim);
  read(j, "control_time_input", m.control_time_input);
  read(j, "confinement", m.confinement);
  if (j.contains("hidden")) {
    const json& h = j.at("hidden");
    reject_unknown(h, {"encoder", "context", "energy", "control", "decoder", "drift"}, "hidden");
    read(h, "encoder", m.encoder_hidden);
    read(h, "context", m.context_dim);
    read(h, "energy", m.energy_hidden);
    read(h, "control", m.control_hidden);
    read(h, "decoder", m.decoder_hidden);
    read(h, "drift", m.drift_hidden);
  }
  if (j.contains("constants")) {
    const json& c = j.at("constants");
    reject_unknown(c, {"gamma", "beta", "M", "trainable"}, "constants");
    read(c, "gamma", m.constants.gamma);
    read(c, "beta", m.constants.beta);
    if (c.contains("M")) {
      if (c.at("M").is_number()) {
        m.constants.mass.assign(m.latent_dim, c.at("M").get<double>());
      } else {
        read(c, "M", m.constants.mass);
      }
    }
    if (c.contains("trainable")) {
      const json& t = c.at("trainable");
      if (t.is_boolean()) {
        m.constants.train_gamma = m.constants.train_beta = m.constants.train_mass = t.get<bool>();
      } else {
        reject_unknown(t, {"gamma", "beta", "M"}, "constants.trainable");
        read(t, "gamma", m.constants.train_gamma);
        read(t, "beta", m.constants.train_beta);
        read(t, "M", m.constants.train_mass);
      }
    }
  }
  m.validate();
  return m;
}

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "config must be a JSON object");
  reject_unknown(j,
                 {"mode", "latent_dim", "obs_dim", "dt", "hidden", "lr", "lr_final", "epochs", "warmup_epochs",
                  "clip_norm", "batch_size", "seed", "constants", "control_time_input", "confinement",
                  "max_skip_fraction"},
                 "training config");
  RunConfig rc;
  rc.model = parse_model_config(j);
  read(j, "dt", rc.train.dt);
  read(j, "lr", rc.train.lr);
  read(j, "lr_final", rc.train.lr_final);
  read(j, "epochs", rc.train.epochs);
  read(j, "warmup_epochs", rc.train.warmup_epochs);
  read(j, "clip_norm", rc.train.clip_norm);
  read(j, "batch_size", rc.train.batch_size);
  read(j, "seed", rc.train.seed);
  read(j, "max_skip_fraction", rc.train.max_skip_fraction);
  rc.train.validate();
  return rc;
}

json to_json(const ModelConfig& m) {
  json j;
  j["mode"] = to_string(m.mode);
  j["latent_dim"] = m.latent_dim;
  j["obs_dim"] = m.obs_dim;
  j["hidden"] = {{"encoder", m.encoder_hidden}, {"context", m.context_dim}, {"energy", m.energy_hidden},
                 {"control", m.control_hidden}, {"decoder", m.decoder_hidden}, {"drift", m.drift_hidden}};
  j["control_time_input"] = m.control_time_input;
  j["confinement"] = m.confinement;
  json c;
  c["gamma"] = m.constants.gamma;
  c["beta"] = m.constants.beta;
  c["M"] = m.constants.mass.empty() ? std::vector<double>(m.latent_dim, 1.0) : m.constants.mass;
  c["trainable"] = {{"gamma", m.constants.train_gamma}, {"beta", m.constants.train_beta},
                    {"M", m.constants.train_mass}};
  j["constants"] = std::move(c);
  return j;
}

json to_json(const RunConfig& rc) {
  json j = to_json(rc.model);
  j["dt"] = rc.train.dt;
  j["lr"] = rc.train.lr;
  j["lr_final"] = rc.train.lr_final;
  j["epochs"] = rc.train.epochs;
  j["warmup_epochs"] = rc.train.warmup_epochs;
  j["clip_norm"] = rc.train.clip_norm;
  j["batch_size"] = rc.train.batch_size;
  j["seed"] = rc.train.seed;
  j["max_skip_fraction"] = rc.train.max_skip_fraction;
  return j;
}

}  // namespace nld::model
