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

#include "data/markov.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace nld::data {

namespace {

constexpr std::uint64_t kWalkStream = 1;
constexpr std::uint64_t kEmitStream = 2;
constexpr std::uint64_t kMeansStream = 3;

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(r).size()) != cols) throw Error(ErrorCode::Io, "ragged matrix in header");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

json spec_to_json(const MarkovSpec& spec) {
  json j;
  j["n_states"] = spec.n_states;
  j["obs_dim"] = spec.obs_dim;
  j["transition"] = matrix_to_json(spec.transition);
  json means = json::array();
  for (const auto& m : spec.emission_means) means.push_back(std::vector<double>(m.data(), m.data() + m.size()));
  j["emission_means"] = std::move(means);
  json covs = json::array();
  for (const auto& c : spec.emission_covs) covs.push_back(matrix_to_json(c));
  j["emission_covs"] = std::move(covs);
  return j;
}

MarkovSpec spec_from_json(const json& j) {
  MarkovSpec spec;
  spec.n_states = j.at("n_states").get<std::size_t>();
  spec.obs_dim = j.at("obs_dim").get<std::size_t>();
  spec.transition = matrix_from_json(j.at("transition"));
  for (const auto& m : j.at("emission_means")) {
    const auto values = m.get<std::vector<double>>();
    spec.emission_means.push_back(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
  }
  for (const auto& c : j.at("emission_covs")) spec.emission_covs.push_back(matrix_from_json(c));
  spec.validate();
  return spec;
}

}  // namespace

void MarkovSpec::validate() const {
  const auto n = static_cast<Eigen::Index>(n_states);
  if (n_states == 0) throw Error(ErrorCode::InvalidArgument, "Markov spec needs at least one state");
  if (transition.rows() != n || transition.cols() != n) {
    throw Error(ErrorCode::InvalidArgument, "transition matrix must be n_states x n_states");
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    double total = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      const double p = transition(r, c);
      if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "transition entries must lie in [0,1]");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw Error(ErrorCode::InvalidArgument, "transition row " + std::to_string(r) + " does not sum to 1");
    }
  }
  if (emission_means.size() != n_states || emission_covs.size() != n_states) {
    throw Error(ErrorCode::InvalidArgument, "need one emission mean and covariance per state");
  }
  const auto d = static_cast<Eigen::Index>(obs_dim);
  for (std::size_t s = 0; s < n_states; ++s) {
    if (emission_means[s].size() != d) throw Error(ErrorCode::InvalidArgument, "emission mean dimension");
    const auto& cov = emission_covs[s];
    if (cov.rows() != d || cov.cols() != d) throw Error(ErrorCode::InvalidArgument, "emission covariance shape");
    if (d > 0 && (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw Error(ErrorCode::InvalidArgument, "emission covariance must be symmetric");
    }
  }
}

bool SequenceDataset::has_states() const {
  if (sequences.empty()) return false;
  for (const auto& s : sequences) {
    if (!s.has_states()) return false;
  }
  return true;
}

std::size_t SequenceDataset::obs_dim() const {
  if (spec) return spec->obs_dim;
  for (const auto& s : sequences) {
    if (!s.observations.empty()) return s.observations.front().size();
  }
  return 0;
}

std::vector<double> stationary_distribution(const Eigen::MatrixXd& transition) {
  const Eigen::Index n = transition.rows();
  if (n == 0 || transition.cols() != n) throw Error(ErrorCode::InvalidArgument, "transition must be square");
  for (Eigen::Index r = 0; r < n; ++r) {
    if (std::abs(transition.row(r).sum() - 1.0) > 1e-12 || transition.row(r).minCoeff() < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "transition matrix is not row-stochastic");
    }
  }
  Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
  constexpr int kMaxIters = 1000000;
  for (int iter = 0; iter < kMaxIters; ++iter) {
    Eigen::RowVectorXd next = pi * transition;
    next /= next.sum();
    const double change = (next - pi).cwiseAbs().maxCoeff();
    pi = std::move(next);
    if (change < 1e-12) return std::vector<double>(pi.data(), pi.data() + n);
  }
  throw Error(ErrorCode::NotConverged, "power iteration did not settle; chain may be reducible or periodic");
}

std::vector<int> sample_walk(const MarkovSpec& spec, std::size_t length, std::uint64_t seed) {
  spec.validate();
  if (length < 1) throw Error(ErrorCode::InvalidArgument, "walk length must be at least 1");
  const std::vector<double> pi = stationary_distribution(spec.transition);
  RngStream rng(seed, kWalkStream);
  // Rows copied once so the hot loop reads contiguous probabilities.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = spec.transition;
  std::vector<int> states(length);
  std::size_t current = rng.categorical(pi.data(), pi.size());
  states[0] = static_cast<int>(current);
  for (std::size_t k = 1; k < length; ++k) {
    current = rng.categorical(rows.data() + current * spec.n_states, spec.n_states);
    states[k] = static_cast<int>(current);
  }
  return states;
}

Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw Error(ErrorCode::ShapeMismatch, "covariance must be square");
  // Pivoted LDL^T: cov = P^T L D L^T P, so P^T L sqrt(D) is a factor.
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::CholeskyFailure, "LDLT factorisation failed");
  const double tol = 1e-12 * std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
  Eigen::VectorXd d = ldlt.vectorD();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d[i] < -tol) throw Error(ErrorCode::CholeskyFailure, "covariance is not positive semi-definite");
    d[i] = std::sqrt(std::max(d[i], 0.0));
  }
  const Eigen::MatrixXd lower = ldlt.matrixL();
  Eigen::MatrixXd factor = lower * d.asDiagonal();
  factor = ldlt.transpositionsP().transpose() * factor;
  if (!(factor * factor.transpose()).isApprox(cov, 1e-9) && cov.norm() > 0.0) {
    throw Error(ErrorCode::CholeskyFailure, "covariance is not positive semi-definite");
  }
  return factor;
}

std::vector<std::vector<double>> emit(const std::vector<int>& states, const MarkovSpec& spec,
                                      std::uint64_t seed) {
  spec.validate();
  std::vector<Eigen::MatrixXd> factors;
  factors.reserve(spec.n_states);
  for (const auto& cov : spec.emission_covs) factors.push_back(semidefinite_cholesky(cov));

  RngStream rng(seed, kEmitStream);
  const auto d = static_cast<Eigen::Index>(spec.obs_dim);
  std::vector<std::vector<double>> observations;
  observations.reserve(states.size());
  Eigen::VectorXd eps(d);
  for (int s : states) {
    if (s < 0 || static_cast<std::size_t>(s) >= spec.n_states) {
      throw Error(ErrorCode::InvalidArgument, "state index out of range");
    }
    for (Eigen::Index i = 0; i < d; ++i) eps[i] = rng.normal();
    const Eigen::VectorXd x = spec.emission_means[static_cast<std::size_t>(s)] +
                              factors[static_cast<std::size_t>(s)] * eps;
    observations.emplace_back(x.data(), x.data() + d);
  }
  return observations;
}

Eigen::MatrixXd reversible_transition(const std::vector<double>& stationary, double leave) {
  const auto n = static_cast<Eigen::Index>(stationary.size());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pi_i = stationary[static_cast<std::size_t>(i)];
      const double pi_j = stationary[static_cast<std::size_t>(j)];
      P(i, j) = 2.0 * leave * pi_j / (pi_i + pi_j);
      off += P(i, j);
    }
    P(i, i) = 1.0 - off;
  }
  return P;
}

MarkovSpec experiment_config(int which, std::uint64_t seed) {
  constexpr std::size_t kStates = 3;
  constexpr std::size_t kObsDim = 15;
  MarkovSpec spec;
  spec.n_states = kStates;
  spec.obs_dim = kObsDim;
  if (which == 1) {
    spec.transition = Eigen::MatrixXd::Constant(kStates, kStates, 0.025);
    spec.transition.diagonal().setConstant(1.0 - 2.0 * 0.025);
  } else if (which == 2) {
    spec.transition = reversible_transition({0.45, 0.35, 0.20}, 0.05);
  } else {
    throw Error(ErrorCode::InvalidArgument, "experiment must be 1 or 2");
  }
  RngStream rng(seed, kMeansStream);
  for (std::size_t s = 0; s < kStates; ++s) {
    Eigen::VectorXd mean(kObsDim);
    for (auto& v : mean) v = 3.0 * rng.normal();
    spec.emission_means.push_back(std::move(mean));
    spec.emission_covs.push_back(Eigen::MatrixXd::Identity(kObsDim, kObsDim));
  }
  spec.validate();
  return spec;
}

std::uint64_t sequence_seed(std::uint64_t seed, std::size_t index) {
  return mix64(mix64(seed) + static_cast<std::uint64_t>(index));
}

SequenceDataset generate_dataset(const MarkovSpec& spec, std::size_t n_sequences, std::size_t length,
                                 std::uint64_t seed) {
  SequenceDataset dataset;
  dataset.spec = spec;
  dataset.seed = seed;
  dataset.sequences.reserve(n_sequences);
  for (std::size_t i = 0; i < n_sequences; ++i) {
    const std::uint64_t s = sequence_seed(seed, i);
    Sequence seq;
    seq.states = sample_walk(spec, length, s);
    seq.observations = emit(seq.states, spec, s);
    dataset.sequences.push_back(std::move(seq));
  }
  return dataset;
}

void write_dataset(const SequenceDataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());

  json header;
  header["format"] = "nld-dataset";
  header["version"] = 1;
  header["seed"] = dataset.seed;
  header["experiment"] = dataset.experiment;
  header["n_sequences"] = dataset.sequences.size();
  std::vector<std::size_t> lengths;
  for (const auto& s : dataset.sequences) lengths.push_back(s.length());
  header["lengths"] = lengths;
  header["obs_dim"] = dataset.obs_dim();
  header["has_states"] = dataset.has_states();
  if (dataset.spec) {
    header["spec"] = spec_to_json(*dataset.spec);
    header["stationary"] = stationary_distribution(dataset.spec->transition);
  }

  std::ofstream hout(dir / "header.json", std::ios::binary);
  if (!hout) throw Error(ErrorCode::Io, "cannot write header in " + dir.string());
  hout << header.dump(2) << '\n';

  std::ofstream out(dir / "dataset.jsonl", std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write dataset in " + dir.string());
  for (const auto& seq : dataset.sequences) {
    json line;
    if (seq.has_states()) line["states"] = seq.states;
    line["obs"] = seq.observations;
    out << line.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed in " + dir.string());
}

SequenceDataset read_dataset(const std::filesystem::path& path) {
  std::filesystem::path lines_path = path;
  std::filesystem::path header_path;
  if (std::filesystem::is_directory(path)) {
    lines_path = path / "dataset.jsonl";
    header_path = path / "header.json";
  } else {
    header_path = path.parent_path() / "header.json";
  }
  std::ifstream in(lines_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + lines_path.string());

  SequenceDataset dataset;
  if (!header_path.empty() && std::filesystem::exists(header_path)) {
    std::ifstream hin(header_path, std::ios::binary);
    try {
      const json header = json::parse(hin);
      dataset.seed = header.value("seed", std::uint64_t{0});
      dataset.experiment = header.value("experiment", 0);
      if (header.contains("spec")) dataset.spec = spec_from_json(header.at("spec"));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Io, "malformed dataset header: " + std::string(e.what()));
    }
  }

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Sequence seq;
      seq.observations = j.at("obs").get<std::vector<std::vector<double>>>();
      if (j.contains("states")) seq.states = j.at("states").get<std::vector<int>>();
      if (seq.has_states() && seq.states.size() != seq.observations.size()) {
        throw Error(ErrorCode::Io, "states and observations differ in length on line " + std::to_string(line_no));
      }
      dataset.sequences.push_back(std::move(seq));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Io, "malformed dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return dataset;
}

}  // namespace nld::data
