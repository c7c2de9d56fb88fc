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

#include "nn/adam.hpp"

#include <cmath>

namespace nld::nn {

AdamState make_adam_state(const ParamStore& params, AdamConfig config) {
  AdamState state;
  state.config = config;
  for (const auto& p : params.values()) {
    state.first_moment.emplace_back(p.rows(), p.cols());
    state.second_moment.emplace_back(p.rows(), p.cols());
  }
  return state;
}

void adam_step(AdamState& state, ParamStore& params, const std::vector<Tensor>& grads,
               const std::vector<bool>& frozen) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "Adam gradient list does not match parameters");
  }
  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params.at(i);
    const Tensor& g = grads[i];
    if (!g.same_shape(p)) throw Error(ErrorCode::ShapeMismatch, "gradient shape for " + params.name(i));
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    const bool skip = !frozen.empty() && frozen[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      if (skip) continue;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace nld::nn
