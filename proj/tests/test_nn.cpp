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

#include <doctest.h>

#include <cmath>

#include "autodiff/numdiff.hpp"
#include "common/error.hpp"
#include "nn/adam.hpp"
#include "nn/layers.hpp"

using namespace nld;
using namespace nld::nn;

namespace {

void zero_all(ParamStore& store) {
  for (auto& t : store.values()) t.fill(0.0);
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed, 5);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

}  // namespace

TEST_CASE("mlp forward examples") {
  RngStream rng(7, 0);
  SUBCASE("zero parameters give zero output") {
    ParamStore store;
    Mlp mlp = Mlp::create(store, "m", {3, 5, 2}, rng);
    zero_all(store);
    for (double v : mlp.eval(store, random_vector(3, 1))) CHECK(v == 0.0);
  }
  SUBCASE("single identity layer") {
    ParamStore store;
    Mlp mlp = Mlp::create(store, "m", {3, 3}, rng);
    zero_all(store);
    for (int i = 0; i < 3; ++i) store[mlp.weight(0)](i, i) = 1.0;
    const auto x = random_vector(3, 2);
    CHECK(mlp.eval(store, x) == x);
  }
  SUBCASE("zero input reaches the output only through the biases") {
    ParamStore store;
    Mlp mlp = Mlp::create(store, "m", {2, 16, 1}, rng);
    const Tensor& b1 = store[mlp.bias(0)];
    const Tensor& w2 = store[mlp.weight(1)];
    double expected = store[mlp.output_bias()][0];
    for (std::size_t j = 0; j < 16; ++j) expected += std::tanh(b1[j]) * w2(j, 0);
    CHECK(mlp.eval(store, std::vector<double>{0.0, 0.0})[0] == doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("taped and plain evaluation agree") {
    ParamStore store;
    Mlp mlp = Mlp::create(store, "m", {3, 8, 8, 2}, rng);
    const auto x = random_vector(3, 3);
    ad::Tape tape;
    BoundParams bound(tape, store);
    Var y = mlp.forward(bound, tape.constant(Tensor::row(x)));
    const auto plain = mlp.eval(store, x);
    for (std::size_t i = 0; i < 2; ++i) CHECK(y.value()[i] == doctest::Approx(plain[i]).epsilon(1e-14));
  }
  SUBCASE("input dimension is checked") {
    ParamStore store;
    Mlp mlp = Mlp::create(store, "m", {3, 4, 1}, rng);
    CHECK_THROWS_AS(mlp.eval(store, std::vector<double>{1.0}), Error);
  }
}

TEST_CASE("mlp input gradient matches finite differences and is differentiable") {
  RngStream rng(9, 0);
  ParamStore store;
  Mlp mlp = Mlp::create(store, "e", {2, 16, 16, 1}, rng);

  const auto x = random_vector(2, 4);
  std::vector<double> grad(2);
  const double value = mlp.value_and_gradient(store, x, grad);
  CHECK(value == doctest::Approx(mlp.eval(store, x)[0]).epsilon(1e-14));
  const double h = 1e-6;
  for (std::size_t i = 0; i < 2; ++i) {
    auto up = x, down = x;
    up[i] += h;
    down[i] -= h;
    const double fd = (mlp.eval(store, up)[0] - mlp.eval(store, down)[0]) / (2 * h);
    CHECK(std::abs(fd - grad[i]) < 1e-6);
  }

  // Batched taped gradient agrees with the plain one, row by row.
  ad::Tape tape;
  BoundParams bound(tape, store);
  Tensor batch(3, 2);
  for (std::size_t r = 0; r < 3; ++r) {
    const auto row = random_vector(2, 10 + r);
    batch(r, 0) = row[0];
    batch(r, 1) = row[1];
  }
  Var g = mlp.input_gradient(bound, tape.constant(batch));
  for (std::size_t r = 0; r < 3; ++r) {
    std::vector<double> plain(2);
    mlp.value_and_gradient(store, batch.row_span(r), plain);
    CHECK(g.value()(r, 0) == doctest::Approx(plain[0]).epsilon(1e-12));
    CHECK(g.value()(r, 1) == doctest::Approx(plain[1]).epsilon(1e-12));
  }

  // The gradient field is itself differentiable: d/dz |grad E(z)|^2 against FD.
  const auto check = ad::gradient_check(
      [&](ad::Tape& t, Var z) {
        BoundParams b(t, store);
        return ad::sum(ad::square(mlp.input_gradient(b, z)));
      },
      Tensor::row(x));
  CHECK(check.max_relative_error < 1e-6);
}

TEST_CASE("output bias only shifts the value") {
  RngStream rng(3, 0);
  ParamStore store;
  Mlp mlp = Mlp::create(store, "e", {2, 8, 1}, rng);
  const auto x = random_vector(2, 6);
  std::vector<double> g1(2), g2(2);
  const double with_bias = mlp.value_and_gradient(store, x, g1, true);
  const double without = mlp.value_and_gradient(store, x, g2, false);
  CHECK(with_bias - without == doctest::Approx(store[mlp.output_bias()][0]));
  CHECK(g1 == g2);
}

TEST_CASE("gru examples") {
  RngStream rng(11, 0);
  ParamStore store;
  Gru gru = Gru::create(store, "g", 3, 4, rng);
  SUBCASE("zero parameters halve the hidden state") {
    zero_all(store);
    const std::vector<double> h{0.2, -0.4, 0.6, -0.8};
    const auto next = gru.step(store, h, random_vector(3, 1));
    for (std::size_t i = 0; i < 4; ++i) CHECK(next[i] == doctest::Approx(0.5 * h[i]).epsilon(1e-15));
    const auto zero = gru.step(store, std::vector<double>(4, 0.0), std::vector<double>(3, 0.0));
    for (double v : zero) CHECK(v == 0.0);
  }
  SUBCASE("outputs stay in (-1, 1)") {
    std::vector<double> h(4, 0.0);
    for (int k = 0; k < 200; ++k) {
      auto x = random_vector(3, 100 + k);
      for (double& v : x) v *= 10.0;
      h = gru.step(store, h, x);
      for (double v : h) CHECK(std::abs(v) < 1.0);
    }
  }
  SUBCASE("taped and plain steps agree") {
    const auto h = random_vector(4, 2);
    const auto x = random_vector(3, 3);
    ad::Tape tape;
    BoundParams bound(tape, store);
    Var next = gru.step(bound, tape.constant(Tensor::row(h)), tape.constant(Tensor::row(x)));
    const auto plain = gru.step(store, h, x);
    for (std::size_t i = 0; i < 4; ++i) CHECK(next.value()[i] == doctest::Approx(plain[i]).epsilon(1e-14));
  }
}

TEST_CASE("gru encoder is causal") {
  RngStream rng(12, 0);
  ParamStore store;
  Gru gru = Gru::create(store, "g", 2, 5, rng);
  std::vector<std::vector<double>> a, b;
  for (int k = 0; k < 10; ++k) {
    a.push_back(random_vector(2, 200 + k));
    b.push_back(k < 6 ? a.back() : random_vector(2, 300 + k));
  }
  std::vector<double> ha(5, 0.0), hb(5, 0.0);
  for (int k = 0; k < 10; ++k) {
    ha = gru.step(store, ha, a[k]);
    hb = gru.step(store, hb, b[k]);
    if (k < 6) CHECK(ha == hb);
  }
  CHECK(ha != hb);
}

TEST_CASE("unrolled gru loss passes the gradient check") {
  RngStream rng(13, 0);
  ParamStore store;
  Gru gru = Gru::create(store, "g", 2, 4, rng);
  Linear head = Linear::create(store, "h", 4, 1, rng);
  std::vector<std::vector<double>> xs;
  for (int k = 0; k < 6; ++k) xs.push_back(random_vector(2, 400 + k));

  auto plain_loss = [&](const ParamStore& s) {
    std::vector<double> h(4, 0.0);
    double loss = 0.0;
    for (const auto& x : xs) {
      h = gru.step(s, h, x);
      const double y = head.eval(s, h)[0];
      loss += y * y;
    }
    return loss;
  };

  ad::Tape tape;
  BoundParams bound(tape, store);
  Var h = tape.constant(Tensor(1, 4, 0.0));
  Var loss = tape.constant(Tensor::scalar(0.0));
  for (const auto& x : xs) {
    h = gru.step(bound, h, tape.constant(Tensor::row(x)));
    loss = loss + ad::square(ad::sum(head.forward(bound, h)));
  }
  CHECK(loss.scalar() == doctest::Approx(plain_loss(store)).epsilon(1e-13));
  const auto grads = ad::backward(tape, loss, bound.vars());

  double worst = 0.0;
  const double step = 1e-5;
  for (std::size_t p = 0; p < store.size(); ++p) {
    for (std::size_t i = 0; i < store.at(p).size(); ++i) {
      ParamStore probe = store;
      probe.at(p)[i] += step;
      const double up = plain_loss(probe);
      probe.at(p)[i] -= 2 * step;
      const double down = plain_loss(probe);
      const double fd = (up - down) / (2 * step);
      worst = std::max(worst, std::abs(grads[p][i] - fd) / (std::abs(fd) + 1e-12));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("adam examples") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParamStore store;
    store.add("x", Tensor(1, 3, std::vector<double>{1.0, -2.0, 3.0}));
    AdamState state = make_adam_state(store, AdamConfig{});
    const Tensor before = store.at(0);
    adam_step(state, store, {Tensor(1, 3, 0.0)});
    CHECK(store.at(0) == before);
    CHECK(state.step == 1);
  }
  SUBCASE("first step moves each coordinate by lr against the gradient sign") {
    ParamStore store;
    store.add("x", Tensor(1, 3, 0.0));
    AdamState state = make_adam_state(store, AdamConfig{.lr = 0.01});
    adam_step(state, store, {Tensor(1, 3, std::vector<double>{0.5, -3.0, 20.0})});
    CHECK(store.at(0)[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(store.at(0)[1] == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(store.at(0)[2] == doctest::Approx(-0.01).epsilon(1e-6));
  }
  SUBCASE("quadratic bowl converges") {
    ParamStore store;
    store.add("x", Tensor(1, 2, std::vector<double>{1.5, -2.0}));
    AdamState state = make_adam_state(store, AdamConfig{.lr = 0.05});
    for (int k = 0; k < 500; ++k) {
      Tensor g = store.at(0);
      for (double& v : g.values()) v *= 2.0;
      adam_step(state, store, {g});
    }
    CHECK(std::hypot(store.at(0)[0], store.at(0)[1]) < 1e-2);
  }
  SUBCASE("frozen tensors do not move") {
    ParamStore store;
    store.add("a", Tensor(1, 1, 1.0));
    store.add("b", Tensor(1, 1, 1.0));
    AdamState state = make_adam_state(store, AdamConfig{});
    adam_step(state, store, {Tensor(1, 1, 1.0), Tensor(1, 1, 1.0)}, {true, false});
    CHECK(store.at(0)[0] == 1.0);
    CHECK(store.at(1)[0] < 1.0);
  }
}
