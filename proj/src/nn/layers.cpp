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

#include "nn/layers.hpp"

#include <Eigen/Core>

#include <cmath>

namespace nld::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using ConstRowVec = Eigen::Map<const Eigen::RowVectorXd>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
ConstRowVec as_row(const Tensor& t) { return ConstRowVec(t.data(), static_cast<Eigen::Index>(t.size())); }
ConstRowVec as_row(std::span<const double> s) {
  return ConstRowVec(s.data(), static_cast<Eigen::Index>(s.size()));
}

Tensor uniform_tensor(std::size_t rows, std::size_t cols, double bound, RngStream& rng) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

Mlp Mlp::create(ParamStore& store, const std::string& prefix, std::vector<std::size_t> sizes,
                RngStream& rng) {
  if (sizes.size() < 2) throw Error(ErrorCode::InvalidArgument, "MLP needs input and output sizes");
  Mlp mlp;
  mlp.sizes_ = std::move(sizes);
  for (std::size_t l = 0; l + 1 < mlp.sizes_.size(); ++l) {
    const std::size_t in = mlp.sizes_[l], out = mlp.sizes_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    mlp.weights_.push_back(store.add(prefix + ".w" + std::to_string(l), uniform_tensor(in, out, bound, rng)));
    mlp.biases_.push_back(store.add(prefix + ".b" + std::to_string(l), uniform_tensor(1, out, bound, rng)));
  }
  return mlp;
}

void Mlp::check_input(std::size_t cols) const {
  if (cols != input_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "MLP expects input width " + std::to_string(input_dim()) +
                                              ", got " + std::to_string(cols));
  }
}

Var Mlp::forward(const BoundParams& params, Var input) const {
  check_input(input.cols());
  Var h = input;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = ad::matmul(h, params[weights_[l]]) + params[biases_[l]];
    if (l + 1 < weights_.size()) h = ad::tanh(h);
  }
  return h;
}

Var Mlp::input_gradient(const BoundParams& params, Var input) const {
  check_input(input.cols());
  if (output_dim() != 1) throw Error(ErrorCode::ShapeMismatch, "input gradient needs a scalar output");
  Tape& tape = params.tape();
  std::vector<Var> hidden;
  Var h = input;
  for (std::size_t l = 0; l + 1 < weights_.size(); ++l) {
    h = ad::tanh(ad::matmul(h, params[weights_[l]]) + params[biases_[l]]);
    hidden.push_back(h);
  }
  // Output layer weight as a row: (1x1) * (H x 1)^T.
  Var delta = ad::matmul(tape.constant(Tensor::scalar(1.0)), params[weights_.back()], true);
  for (std::size_t l = hidden.size(); l-- > 0;) {
    Var slope = ad::add_scalar(ad::neg(ad::square(hidden[l])), 1.0);
    delta = slope * delta;
    delta = ad::matmul(delta, params[weights_[l]], true);
  }
  if (hidden.empty()) delta = ad::broadcast_to(delta, input.rows(), input.cols());
  return delta;
}

std::vector<double> Mlp::eval(const ParamStore& store, std::span<const double> input) const {
  check_input(input.size());
  Eigen::RowVectorXd h = as_row(input);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::RowVectorXd a = h * as_matrix(store[weights_[l]]) + as_row(store[biases_[l]]);
    if (l + 1 < weights_.size()) a = a.array().tanh().matrix();
    h = std::move(a);
  }
  return std::vector<double>(h.data(), h.data() + h.size());
}

double Mlp::value_and_gradient(const ParamStore& store, std::span<const double> input,
                               std::span<double> gradient, bool include_output_bias) const {
  check_input(input.size());
  if (output_dim() != 1) throw Error(ErrorCode::ShapeMismatch, "value_and_gradient needs a scalar output");
  if (gradient.size() != input.size()) throw Error(ErrorCode::ShapeMismatch, "gradient buffer size");
  std::vector<Eigen::RowVectorXd> hidden;
  hidden.reserve(weights_.size());
  Eigen::RowVectorXd h = as_row(input);
  for (std::size_t l = 0; l + 1 < weights_.size(); ++l) {
    h = (h * as_matrix(store[weights_[l]]) + as_row(store[biases_[l]])).array().tanh().matrix();
    hidden.push_back(h);
  }
  const auto w_out = as_matrix(store[weights_.back()]);
  double value = (h * w_out)(0, 0);
  if (include_output_bias) value += store[biases_.back()][0];

  Eigen::RowVectorXd delta = w_out.transpose();
  for (std::size_t l = hidden.size(); l-- > 0;) {
    delta = delta.cwiseProduct((1.0 - hidden[l].array().square()).matrix());
    delta = delta * as_matrix(store[weights_[l]]).transpose();
  }
  for (std::size_t i = 0; i < gradient.size(); ++i) gradient[i] = delta[static_cast<Eigen::Index>(i)];
  return value;
}

Gru Gru::create(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                std::size_t hidden_dim, RngStream& rng) {
  Gru gru;
  gru.input_dim_ = input_dim;
  gru.hidden_dim_ = hidden_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  gru.input_weight_ = store.add(prefix + ".w_input", uniform_tensor(input_dim, 3 * hidden_dim, bound, rng));
  gru.gate_recurrent_ = store.add(prefix + ".u_gates", uniform_tensor(hidden_dim, 2 * hidden_dim, bound, rng));
  gru.cand_recurrent_ = store.add(prefix + ".u_cand", uniform_tensor(hidden_dim, hidden_dim, bound, rng));
  gru.bias_ = store.add(prefix + ".bias", uniform_tensor(1, 3 * hidden_dim, bound, rng));
  return gru;
}

Var Gru::step(const BoundParams& params, Var hidden, Var input) const {
  if (input.cols() != input_dim_ || hidden.cols() != hidden_dim_) {
    throw Error(ErrorCode::ShapeMismatch, "GRU step dimensions");
  }
  const std::size_t H = hidden_dim_;
  Var from_input = ad::matmul(input, params[input_weight_]) + params[bias_];
  Var from_hidden = ad::matmul(hidden, params[gate_recurrent_]);
  Var gates = ad::sigmoid(ad::slice_cols(from_input, 0, 2 * H) + from_hidden);
  Var update = ad::slice_cols(gates, 0, H);
  Var reset = ad::slice_cols(gates, H, 2 * H);
  Var candidate = ad::tanh(ad::slice_cols(from_input, 2 * H, 3 * H) +
                           ad::matmul(reset * hidden, params[cand_recurrent_]));
  // (1 - z) * n + z * h  ==  n + z * (h - n)
  return candidate + update * (hidden - candidate);
}

std::vector<double> Gru::step(const ParamStore& store, std::span<const double> hidden,
                              std::span<const double> input) const {
  if (input.size() != input_dim_ || hidden.size() != hidden_dim_) {
    throw Error(ErrorCode::ShapeMismatch, "GRU step dimensions");
  }
  const auto H = static_cast<Eigen::Index>(hidden_dim_);
  const Eigen::RowVectorXd h = as_row(hidden);
  const Eigen::RowVectorXd from_input = as_row(input) * as_matrix(store[input_weight_]) + as_row(store[bias_]);
  const Eigen::RowVectorXd from_hidden = h * as_matrix(store[gate_recurrent_]);
  Eigen::RowVectorXd gates = from_input.head(2 * H) + from_hidden;
  for (auto& g : gates) g = ad::sigmoid_value(g);
  const Eigen::RowVectorXd update = gates.head(H);
  const Eigen::RowVectorXd reset = gates.tail(H);
  Eigen::RowVectorXd candidate =
      (from_input.tail(H) + reset.cwiseProduct(h) * as_matrix(store[cand_recurrent_])).array().tanh().matrix();
  Eigen::RowVectorXd next = candidate + update.cwiseProduct(h - candidate);
  return std::vector<double>(next.data(), next.data() + next.size());
}

Linear Linear::create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                      RngStream& rng) {
  Linear lin;
  lin.in_ = in;
  lin.out_ = out;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  lin.weight_ = store.add(prefix + ".w", uniform_tensor(in, out, bound, rng));
  lin.bias_ = store.add(prefix + ".b", uniform_tensor(1, out, bound, rng));
  return lin;
}

Var Linear::forward(const BoundParams& params, Var input) const {
  if (input.cols() != in_) throw Error(ErrorCode::ShapeMismatch, "linear layer input width");
  return ad::matmul(input, params[weight_]) + params[bias_];
}

std::vector<double> Linear::eval(const ParamStore& store, std::span<const double> input) const {
  if (input.size() != in_) throw Error(ErrorCode::ShapeMismatch, "linear layer input width");
  Eigen::RowVectorXd out = as_row(input) * as_matrix(store[weight_]) + as_row(store[bias_]);
  return std::vector<double>(out.data(), out.data() + out.size());
}

}  // namespace nld::nn
