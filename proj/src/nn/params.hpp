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
#include <string>
#include <vector>

#include "autodiff/tape.hpp"

namespace nld::nn {

using ad::Tape;
using ad::Tensor;
using ad::Var;

/// Index of a tensor inside a ParamStore.
struct ParamId {
  std::size_t index = 0;
};

/// Flat, named collection of trainable tensors. Network modules hold ParamIds
/// into a store rather than owning tensors, so the optimizer and checkpoint
/// code see every parameter uniformly.
class ParamStore {
 public:
  ParamId add(std::string name, Tensor value) {
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return ParamId{values_.size() - 1};
  }

  std::size_t size() const noexcept { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const Tensor& operator[](ParamId id) const { return values_[id.index]; }
  Tensor& operator[](ParamId id) { return values_[id.index]; }
  const Tensor& at(std::size_t i) const { return values_[i]; }
  Tensor& at(std::size_t i) { return values_[i]; }
  const std::vector<Tensor>& values() const noexcept { return values_; }
  std::vector<Tensor>& values() noexcept { return values_; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

/// Per-tape leaves for every tensor in a ParamStore.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParamStore& store) : tape_(&tape) {
    vars_.reserve(store.size());
    for (const auto& value : store.values()) vars_.push_back(tape.leaf(value));
  }

  Var operator[](ParamId id) const { return vars_[id.index]; }
  const std::vector<Var>& vars() const noexcept { return vars_; }
  Tape& tape() const noexcept { return *tape_; }

 private:
  Tape* tape_;
  std::vector<Var> vars_;
};

}  // namespace nld::nn
