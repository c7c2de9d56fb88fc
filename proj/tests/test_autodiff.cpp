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
#include <functional>

#include "autodiff/numdiff.hpp"
#include "autodiff/tape.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"

using namespace nld::ad;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  nld::RngStream rng(seed, 99);
  Tensor t(r, c);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Reduces any op output to a scalar with fixed random weights so every output
// entry contributes a distinct cotangent.
Var weighted_sum(Tape& tape, Var y) {
  return sum(y * tape.constant(random_tensor(y.rows(), y.cols(), 1234)));
}

}  // namespace

TEST_CASE("backward on the textbook examples") {
  SUBCASE("x^2 at 3") {
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(3.0));
    tape.backward(square(x));
    CHECK(tape.grad(x.id())[0] == doctest::Approx(6.0));
  }
  SUBCASE("x*y at (2,5)") {
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(2.0));
    Var y = tape.leaf(Tensor::scalar(5.0));
    const auto g = backward(tape, x * y, {x, y});
    CHECK(g[0][0] == doctest::Approx(5.0));
    CHECK(g[1][0] == doctest::Approx(2.0));
  }
  SUBCASE("leaf off the path gets zero") {
    Tape tape;
    Var x = tape.leaf(Tensor(2, 2, 1.0));
    Var unused = tape.leaf(Tensor(3, 1, 1.0));
    const auto g = backward(tape, sum(x), {x, unused});
    CHECK(g[1] == Tensor(3, 1, 0.0));
  }
}

TEST_CASE("non-scalar root is rejected") {
  Tape tape;
  Var x = tape.leaf(Tensor(2, 1, 1.0));
  try {
    tape.backward(x);
    FAIL("expected NonScalarRoot");
  } catch (const nld::Error& e) {
    CHECK(e.code() == nld::ErrorCode::NonScalarRoot);
  }
}

TEST_CASE("every primitive matches central differences") {
  using Unary = std::function<Var(Tape&, Var)>;
  const Tensor x = random_tensor(3, 4, 7);
  const Tensor positive = random_tensor(3, 4, 8, 0.5, 2.0);
  struct Case {
    const char* name;
    Unary f;
    bool positive_input;
  };
  const Case cases[] = {
      {"add", [](Tape& t, Var a) { return a + t.constant(random_tensor(3, 4, 1)); }, false},
      {"add broadcast row", [](Tape& t, Var a) { return a + t.constant(random_tensor(1, 4, 2)); }, false},
      {"sub", [](Tape& t, Var a) { return t.constant(random_tensor(3, 1, 3)) - a; }, false},
      {"mul", [](Tape&, Var a) { return a * a; }, false},
      {"div", [](Tape& t, Var a) { return t.constant(random_tensor(3, 4, 4)) / a; }, true},
      {"neg", [](Tape&, Var a) { return -a; }, false},
      {"scale", [](Tape&, Var a) { return scale(a, -1.7); }, false},
      {"add_scalar", [](Tape&, Var a) { return add_scalar(a, 0.3) * a; }, false},
      {"matmul", [](Tape& t, Var a) { return matmul(a, t.constant(random_tensor(4, 5, 5))); }, false},
      {"matmul transposed", [](Tape& t, Var a) { return matmul(t.constant(random_tensor(2, 4, 6)), a, true); },
       false},
      {"matmul self", [](Tape&, Var a) { return matmul(a, a, true); }, false},
      {"tanh", [](Tape&, Var a) { return tanh(a); }, false},
      {"sigmoid", [](Tape&, Var a) { return sigmoid(a); }, false},
      {"softplus", [](Tape&, Var a) { return softplus(a); }, false},
      {"exp", [](Tape&, Var a) { return exp(a); }, false},
      {"log", [](Tape&, Var a) { return log(a); }, true},
      {"square", [](Tape&, Var a) { return square(a); }, false},
      {"sqrt", [](Tape&, Var a) { return sqrt(a); }, true},
      {"sum_cols", [](Tape&, Var a) { return square(sum_cols(a)); }, false},
      {"sum_rows", [](Tape&, Var a) { return square(sum_rows(a)); }, false},
      {"slice_cols", [](Tape&, Var a) { return slice_cols(a, 1, 3); }, false},
      {"slice_rows", [](Tape&, Var a) { return slice_rows(a, 1, 3) * slice_rows(a, 0, 2); }, false},
      {"concat_cols", [](Tape&, Var a) { return concat_cols({a, square(a)}); }, false},
      {"concat_rows", [](Tape&, Var a) { return concat_rows({tanh(a), a}); }, false},
      {"broadcast", [](Tape&, Var a) { return broadcast_to(sum_rows(a), 5, 4); }, false},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    const auto result = gradient_check([&](Tape& t, Var a) { return weighted_sum(t, c.f(t, a)); },
                                       c.positive_input ? positive : x);
    CHECK(result.max_relative_error < 1e-6);
  }
}

TEST_CASE("gradient_check examples") {
  const Tensor x = random_tensor(2, 3, 11);
  CHECK(gradient_check([](Tape&, Var a) { return sum(square(a)); }, x).max_relative_error < 1e-9);
  CHECK(gradient_check([](Tape&, Var a) { return sum(softplus(scale(softplus(a), 2.0))); }, x).max_relative_error <
        1e-6);
  const auto constant = gradient_check([](Tape& t, Var) { return t.constant(Tensor::scalar(4.0)); }, x);
  CHECK(constant.max_relative_error == 0.0);
  for (double g : constant.ad_gradient) CHECK(g == 0.0);
  for (double g : constant.fd_gradient) CHECK(g == 0.0);
}

TEST_CASE("two-layer tanh network gradient") {
  const Tensor w1 = random_tensor(3, 8, 21), b1 = random_tensor(1, 8, 22);
  const Tensor w2 = random_tensor(8, 1, 23), b2 = random_tensor(1, 1, 24);
  const auto result = gradient_check(
      [&](Tape& t, Var x) {
        Var h = tanh(matmul(x, t.constant(w1)) + t.constant(b1));
        return sum(matmul(h, t.constant(w2)) + t.constant(b2));
      },
      random_tensor(1, 3, 25));
  CHECK(result.max_relative_error < 1e-6);
}

TEST_CASE("replay is bitwise identical") {
  auto run = [] {
    Tape tape;
    Var x = tape.leaf(random_tensor(4, 4, 31));
    Var y = sum(tanh(matmul(x, x)) * softplus(x));
    tape.backward(y);
    return std::make_pair(y.scalar(), tape.grad(x.id()));
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("shape errors") {
  Tape tape;
  Var a = tape.leaf(Tensor(2, 3));
  Var b = tape.leaf(Tensor(3, 2));
  CHECK_THROWS_AS(a + b, nld::Error);
  CHECK_THROWS_AS(matmul(a, a), nld::Error);
  CHECK_THROWS_AS(Tensor(2, 2, std::vector<double>{1.0}), nld::Error);
}

TEST_CASE("softplus helpers") {
  for (double y : {1e-6, 0.1, 1.0, 5.0, 40.0}) CHECK(softplus_value(softplus_inverse(y)) == doctest::Approx(y));
  CHECK(softplus_value(1000.0) == doctest::Approx(1000.0));
  CHECK(std::isfinite(softplus_value(-1000.0)));
}

TEST_CASE("hessian_fd examples") {
  auto h1 = hessian_fd([](std::span<const double> z) { return std::vector<double>{2 * z[0], 6 * z[1]}; },
                       std::vector<double>{0.3, -0.7});
  CHECK(std::abs(h1(0, 0) - 2.0) < 1e-6);
  CHECK(std::abs(h1(1, 1) - 6.0) < 1e-6);
  CHECK(std::abs(h1(0, 1)) < 1e-6);
  auto h2 = hessian_fd([](std::span<const double> z) { return std::vector<double>{z[1], z[0]}; },
                       std::vector<double>{1.0, 2.0});
  CHECK(std::abs(h2(0, 1) - 1.0) < 1e-6);
  CHECK(std::abs(h2(0, 0)) < 1e-6);
  CHECK(h2(0, 1) == h2(1, 0));
  auto h3 = hessian_fd([](std::span<const double> z) { return std::vector<double>{4 * z[0] * z[0] * z[0]}; },
                       std::vector<double>{1.0});
  CHECK(std::abs(h3(0, 0) - 12.0) < 1e-4);
  auto h4 = hessian_fd(
      [](std::span<const double> z) {
        return std::vector<double>{std::cos(z[0]) * z[1] + z[2], std::sin(z[0]) + 2 * z[1] * z[2], z[0] + z[1] * z[1]};
      },
      std::vector<double>{0.4, 1.1, -0.5});
  CHECK((h4 - h4.transpose()).norm() == 0.0);
}
