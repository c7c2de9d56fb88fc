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
#include <span>
#include <string>
#include <vector>

#include "common/rng.hpp"
#include "nn/params.hpp"

namespace nld::nn {

/// Fully connected network: tanh on hidden layers, linear output.
/// Weights are stored (fan_in x fan_out) so a batch multiplies from the left.
class Mlp {
 public:
  Mlp() = default;

  /// `sizes` = {input, hidden..., output}. Weights and biases are drawn from
  /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static Mlp create(ParamStore& store, const std::string& prefix, std::vector<std::size_t> sizes,
                    RngStream& rng);

  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t num_layers() const { return weights_.size(); }
  ParamId weight(std::size_t layer) const { return weights_[layer]; }
  ParamId bias(std::size_t layer) const { return biases_[layer]; }
  ParamId output_bias() const { return biases_.back(); }

  /// Batched forward pass, (B x in) -> (B x out).
  Var forward(const BoundParams& params, Var input) const;

  /// Row b of the result is the gradient of output row b with respect to
  /// input row b. Built from primitive ops, so it is itself differentiable
  /// in both the input and the parameters. Requires output_dim() == 1.
  Var input_gradient(const BoundParams& params, Var input) const;

  std::vector<double> eval(const ParamStore& store, std::span<const double> input) const;

  /// Scalar output and its input gradient without a tape. The output bias is
  /// dropped when `include_output_bias` is false; it never affects the
  /// gradient.
  double value_and_gradient(const ParamStore& store, std::span<const double> input,
                            std::span<double> gradient, bool include_output_bias = true) const;

 private:
  void check_input(std::size_t cols) const;

  std::vector<std::size_t> sizes_;
  std::vector<ParamId> weights_;
  std::vector<ParamId> biases_;
};

/// Single-layer GRU cell:
///   z  = sigmoid(x Wz + h Uz + bz)
///   r  = sigmoid(x Wr + h Ur + br)
///   n  = tanh(x Wn + (r * h) Un + bn)
///   h' = (1 - z) * n + z * h
/// The three input maps share one (in x 3H) matrix, the z/r recurrent maps one
/// (H x 2H) matrix.
class Gru {
 public:
  Gru() = default;

  static Gru create(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                    std::size_t hidden_dim, RngStream& rng);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }

  Var step(const BoundParams& params, Var hidden, Var input) const;

  std::vector<double> step(const ParamStore& store, std::span<const double> hidden,
                           std::span<const double> input) const;

 private:
  std::size_t input_dim_ = 0;
  std::size_t hidden_dim_ = 0;
  ParamId input_weight_;     // in x 3H  (z | r | n)
  ParamId gate_recurrent_;   // H x 2H   (z | r)
  ParamId cand_recurrent_;   // H x H
  ParamId bias_;             // 1 x 3H
};

/// Affine map (B x in) -> (B x out), no activation.
class Linear {
 public:
  Linear() = default;
  static Linear create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                       RngStream& rng);

  std::size_t input_dim() const { return in_; }
  std::size_t output_dim() const { return out_; }
  ParamId weight() const { return weight_; }
  ParamId bias() const { return bias_; }

  Var forward(const BoundParams& params, Var input) const;
  std::vector<double> eval(const ParamStore& store, std::span<const double> input) const;

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  ParamId weight_;
  ParamId bias_;
};

}  // namespace nld::nn
