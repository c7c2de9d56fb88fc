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

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace nld::data {

/// Discrete-time Markov chain with one Gaussian emission per state.
struct MarkovSpec {
  std::size_t n_states = 0;
  std::size_t obs_dim = 0;
  Eigen::MatrixXd transition;                 // row-stochastic, n x n
  std::vector<Eigen::VectorXd> emission_means;
  std::vector<Eigen::MatrixXd> emission_covs;

  /// Throws InvalidArgument on malformed shapes or non-stochastic rows.
  void validate() const;
};

struct Sequence {
  std::vector<int> states;                     // empty when ground truth is unknown
  std::vector<std::vector<double>> observations;

  std::size_t length() const { return observations.size(); }
  bool has_states() const { return !states.empty(); }
};

struct SequenceDataset {
  std::vector<Sequence> sequences;
  std::optional<MarkovSpec> spec;
  std::uint64_t seed = 0;
  int experiment = 0;  // 0 when not one of the built-in configurations

  bool has_states() const;
  std::size_t obs_dim() const;
};

/// Power iteration from the uniform vector until the l-infinity change drops
/// below 1e-12 (at most 10^6 iterations). Throws NotConverged otherwise.
std::vector<double> stationary_distribution(const Eigen::MatrixXd& transition);

/// Random walk whose first state is drawn from the stationary distribution.
std::vector<int> sample_walk(const MarkovSpec& spec, std::size_t length, std::uint64_t seed);

/// One Gaussian draw per step, mean + L * eps with L the (semi-definite)
/// Cholesky factor of the state's covariance. Throws CholeskyFailure when a
/// covariance is not positive semi-definite.
std::vector<std::vector<double>> emit(const std::vector<int>& states, const MarkovSpec& spec,
                                      std::uint64_t seed);

/// Factor F with F F^T = cov for a positive semidefinite cov (pivoted LDL^T,
/// so F is a row permutation of a lower-triangular matrix). Zero pivots are
/// allowed; an indefinite cov throws CholeskyFailure.
Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& cov);

/// Built-in three-state configurations. Experiment 1 moves to each other
/// state with probability 0.025 per step; experiment 2 is the reversible
/// chain with stationary vector (0.45, 0.35, 0.20). Emission means are 3 *
/// N(0, I) draws, covariances the identity, obs_dim 15.
MarkovSpec experiment_config(int which, std::uint64_t seed);

/// Reversible chain P_ij = 2 * leave * pi_j / (pi_i + pi_j) (i != j) with
/// the diagonal absorbing the remainder of each row.
Eigen::MatrixXd reversible_transition(const std::vector<double>& stationary, double leave);

/// Sequence i uses walk/emission streams keyed by sequence_seed(seed, i).
SequenceDataset generate_dataset(const MarkovSpec& spec, std::size_t n_sequences, std::size_t length,
                                 std::uint64_t seed);
std::uint64_t sequence_seed(std::uint64_t seed, std::size_t index);

/// Writes `dataset.jsonl` (one {"states","obs"} object per line) and
/// `header.json` (spec, seed, lengths) into `dir`.
void write_dataset(const SequenceDataset& dataset, const std::filesystem::path& dir);
SequenceDataset read_dataset(const std::filesystem::path& dir);

}  // namespace nld::data
