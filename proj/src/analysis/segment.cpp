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

#include "analysis/segment.hpp"

#include <algorithm>
#include <numeric>

#include "common/error.hpp"

namespace nld::analysis {

SegmentationResult segment_sequence(const model::NldModel& model, const model::Observations& observations,
                                    const std::vector<Minimum>& minima, double dt, double merge_tol,
                                    const FlowOptions& flow) {
  SegmentationResult result;
  if (observations.empty()) return result;
  const auto contexts = model.encode(observations);
  const auto z0 = model.initial_posterior(contexts.front()).first;

  sde::SdeConfig config;
  config.dt = dt;
  config.n_steps = observations.size() - 1;
  config.latent_dim = model.latent_dim();
  std::vector<std::vector<double>> states;
  if (config.n_steps == 0) {
    states.push_back(z0);
  } else {
    const auto wiener = sde::zero_wiener(config, model.latent_dim());
    states = sde::simulate_posterior(model.prior_system(), model.control_fn(contexts), z0, config, wiener)
                 .path.states;
  }

  const ScalarField field = energy_field(model);
  const std::size_t d = model.latent_dim();
  for (const auto& state : states) {
    const std::vector<double> position(state.begin(), state.begin() + static_cast<std::ptrdiff_t>(d));
    const FlowResult end = gradient_flow(field, position, flow);
    if (auto idx = assign_to_minimum(end.point, minima, merge_tol)) {
      result.labels.push_back(static_cast<int>(*idx));
    } else {
      result.labels.push_back(-1);
      ++result.unassigned;
    }
  }
  return result;
}

PermutationMatch best_permutation_accuracy(std::span<const int> predicted, std::span<const int> truth,
                                           std::size_t n_states) {
  if (predicted.size() != truth.size()) throw Error(ErrorCode::LengthMismatch, "label sequences differ in length");
  if (predicted.empty()) throw Error(ErrorCode::InvalidArgument, "empty label sequences");
  const auto n = static_cast<int>(n_states);
  // overlap[p][t] = number of steps with predicted p and true t.
  std::vector<std::size_t> overlap(n_states * n_states, 0);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] >= n || truth[i] < 0 || truth[i] >= n) {
      throw Error(ErrorCode::InvalidArgument, "label out of range");
    }
    if (predicted[i] >= 0) ++overlap[static_cast<std::size_t>(predicted[i]) * n_states + truth[i]];
  }
  std::vector<int> perm(n_states);
  std::iota(perm.begin(), perm.end(), 0);
  PermutationMatch best;
  std::size_t best_hits = 0;
  bool first = true;
  do {
    std::size_t hits = 0;
    for (std::size_t p = 0; p < n_states; ++p) hits += overlap[p * n_states + perm[p]];
    if (first || hits > best_hits) {
      best_hits = hits;
      best.permutation = perm;
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.accuracy = static_cast<double>(best_hits) / static_cast<double>(predicted.size());
  return best;
}

}  // namespace nld::analysis
