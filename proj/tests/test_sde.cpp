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
#include <limits>
#include <sstream>

#include "common/error.hpp"
#include "sde/sde.hpp"

using namespace nld;
using namespace nld::sde;

namespace {

// dz = -z / gamma dt + sqrt(2 / (beta gamma)) dW, i.e. E(z) = |z|^2 / 2.
SdeSystem quadratic_overdamped(std::size_t d, double gamma = 1.0, double beta = 1.0) {
  SdeSystem s;
  s.state_dim = d;
  s.noise_dim = d;
  s.diffusion = std::sqrt(2.0 / (beta * gamma));
  s.drift = [gamma](std::span<const double> z, double, std::span<double> out) {
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = -z[i] / gamma;
  };
  return s;
}

// (q, p) with E(q) = k |q|^2 / 2, unit mass.
SdeSystem quadratic_underdamped(std::size_t d, double gamma, double beta, double k = 1.0) {
  SdeSystem s;
  s.state_dim = 2 * d;
  s.noise_offset = d;
  s.noise_dim = d;
  s.diffusion = std::sqrt(2.0 * gamma / beta);
  s.drift = [d, gamma, k](std::span<const double> z, double, std::span<double> out) {
    for (std::size_t i = 0; i < d; ++i) {
      out[i] = z[d + i];
      out[d + i] = -k * z[i] - gamma * z[d + i];
    }
  };
  return s;
}

}  // namespace

TEST_CASE("wiener increments") {
  SdeConfig cfg{0.01, 500000, 2};
  const WienerPath w = sample_wiener(cfg, 2, 3);
  CHECK(w.increments.size() == 1000000);
  double s2 = 0.0;
  for (double v : w.increments) s2 += v * v;
  CHECK(s2 / 1e6 == doctest::Approx(0.01).epsilon(0.01));
  CHECK(sample_wiener(cfg, 2, 3).increments == w.increments);

  SdeConfig a{0.01, 10, 1}, b{0.04, 10, 1};
  const auto wa = sample_wiener(a, 1, 9), wb = sample_wiener(b, 1, 9);
  for (std::size_t i = 0; i < 10; ++i) CHECK(wb.increments[i] == doctest::Approx(2.0 * wa.increments[i]));
}

TEST_CASE("euler-maruyama step examples") {
  std::vector<double> out(1);
  const double zero = 0.0, root2 = std::sqrt(2.0);
  euler_maruyama_step(std::vector<double>{1.0}, std::vector<double>{-1.0}, {&zero, 1}, std::vector<double>{0.3},
                      0.1, out);
  CHECK(out[0] == doctest::Approx(0.9));
  euler_maruyama_step(std::vector<double>{0.0}, std::vector<double>{0.0}, {&root2, 1}, std::vector<double>{0.05},
                      0.1, out);
  CHECK(out[0] == doctest::Approx(0.0707107).epsilon(1e-6));
  euler_maruyama_step(std::vector<double>{0.7}, std::vector<double>{3.0}, {&root2, 1}, std::vector<double>{0.0},
                      0.0, out);
  CHECK(out[0] == 0.7);
  const double inf = std::numeric_limits<double>::infinity();
  try {
    euler_maruyama_step(std::vector<double>{0.0}, std::vector<double>{inf}, {&zero, 1}, std::vector<double>{0.0},
                        0.1, out);
    FAIL("expected NonFinite");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
  }
}

TEST_CASE("overdamped quadratic prior is stationary standard normal") {
  SdeConfig cfg{0.01, 100000, 1};
  const LatentPath path = simulate_prior(quadratic_overdamped(1), std::vector<double>{0.0}, cfg, 17);
  CHECK(path.times.size() == 100001);
  CHECK(path.states.size() == 100001);
  CHECK(path.control_norms.empty());
  double m = 0, s2 = 0;
  for (const auto& z : path.states) m += z[0];
  m /= path.states.size();
  for (const auto& z : path.states) s2 += (z[0] - m) * (z[0] - m);
  s2 /= path.states.size() - 1;
  CHECK(std::abs(m) < 0.05);
  CHECK(std::abs(s2 - 1.0) < 0.05);
  // Ergodic average of z^4 against the Gaussian fourth moment 3.
  double m4 = 0;
  for (const auto& z : path.states) m4 += std::pow(z[0], 4);
  CHECK(m4 / path.states.size() == doctest::Approx(3.0).epsilon(0.15));
}

TEST_CASE("zero diffusion gives explicit-Euler gradient flow") {
  SdeSystem s = quadratic_overdamped(2);
  s.diffusion = 0.0;
  SdeConfig cfg{0.1, 20, 2};
  const auto path = simulate_prior(s, std::vector<double>{1.0, -2.0}, cfg, 1);
  for (std::size_t k = 0; k <= 20; ++k) {
    const double factor = std::pow(0.9, static_cast<double>(k));
    CHECK(path.states[k][0] == doctest::Approx(factor));
    CHECK(path.states[k][1] == doctest::Approx(-2.0 * factor));
  }
}

TEST_CASE("underdamped energy drift is second order per step") {
  SdeSystem s = quadratic_underdamped(1, 0.0, 1.0);
  s.diffusion = 0.0;
  const double dt = 0.01;
  SdeConfig cfg{dt, 1000, 1};
  const auto path = simulate_prior(s, std::vector<double>{1.0, 0.0}, cfg, zero_wiener(cfg, 1));
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < path.states.size(); ++k) {
    auto h = [](const std::vector<double>& z) { return 0.5 * z[0] * z[0] + 0.5 * z[1] * z[1]; };
    worst = std::max(worst, std::abs(h(path.states[k + 1]) - h(path.states[k])));
  }
  // Explicit Euler on the oscillator multiplies H by exactly 1 + dt^2 per step.
  CHECK(worst <= 1.0001 * dt * dt * 0.5 * std::exp(1000 * dt * dt));
  // Against the exact solution cos t.
  CHECK(std::abs(path.states.back()[0] - std::cos(10.0)) < 0.1);
}

TEST_CASE("underdamped positions receive no noise") {
  const SdeSystem s = quadratic_underdamped(2, 1.0, 1.0);
  SdeConfig cfg{0.05, 50, 2};
  const auto path = simulate_prior(s, std::vector<double>{0.5, -0.5, 0.1, 0.2}, cfg, 4);
  for (std::size_t k = 0; k + 1 < path.states.size(); ++k) {
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(path.states[k + 1][i] == path.states[k][i] + path.states[k][2 + i] * 0.05);
    }
  }
}

TEST_CASE("posterior KL identities") {
  const SdeSystem prior = quadratic_overdamped(2);
  SUBCASE("zero control: no KL and the prior path bitwise") {
    SdeConfig cfg{0.05, 200, 2};
    const auto w = sample_wiener(cfg, 2, 8);
    const ControlFn zero = [](std::span<const double>, double, std::size_t, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
    };
    const auto post = simulate_posterior(prior, zero, std::vector<double>{0.3, 0.1}, cfg, w);
    const auto pri = simulate_prior(prior, std::vector<double>{0.3, 0.1}, cfg, w);
    CHECK(post.kl == 0.0);
    CHECK(post.path.states == pri.states);
  }
  SUBCASE("constant |u|^2 = 2 over T = 1") {
    SdeConfig cfg{0.01, 100, 2};
    const double g = prior.diffusion;
    const ControlFn constant = [g](std::span<const double>, double, std::size_t, std::span<double> out) {
      out[0] = g;
      out[1] = g;
    };
    const auto post = simulate_posterior(prior, constant, std::vector<double>{0.0, 0.0}, cfg, zero_wiener(cfg, 2));
    CHECK(post.kl == doctest::Approx(1.0).epsilon(1e-12));
    for (double n : post.path.control_norms) CHECK(n == doctest::Approx(2.0).epsilon(1e-14));
  }
  SUBCASE("ramp u = t on [0, 1]") {
    SdeSystem one = quadratic_overdamped(1);
    SdeConfig cfg{0.001, 1000, 1};
    const double g = one.diffusion;
    const ControlFn ramp = [g](std::span<const double>, double t, std::size_t, std::span<double> out) {
      out[0] = g * t;
    };
    const auto post = simulate_posterior(one, ramp, std::vector<double>{0.0}, cfg, zero_wiener(cfg, 1));
    CHECK(std::abs(post.kl - 1.0 / 6.0) < 1e-3);
    CHECK(kl_path_integral(post.path.control_norms, cfg.dt) == post.kl);
  }
  SUBCASE("singular diffusion") {
    SdeSystem flat = prior;
    flat.diffusion = 0.0;
    SdeConfig cfg{0.01, 10, 2};
    const ControlFn zero = [](std::span<const double>, double, std::size_t, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
    };
    try {
      simulate_posterior(flat, zero, std::vector<double>{0.0, 0.0}, cfg, zero_wiener(cfg, 2));
      FAIL("expected SingularDiffusion");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SingularDiffusion);
    }
  }
}

TEST_CASE("kl is nonnegative") {
  CHECK(kl_path_integral(std::vector<double>{}, 0.1) == 0.0);
  CHECK(kl_path_integral(std::vector<double>{0.0, 3.0, 1.0}, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(sample_wiener(SdeConfig{0.0, 10, 1}, 1, 0), Error);
  CHECK_THROWS_AS(sample_wiener(SdeConfig{0.1, 0, 1}, 1, 0), Error);
}

TEST_CASE("path csv") {
  const SdeSystem s = quadratic_underdamped(1, 1.0, 1.0);
  SdeConfig cfg{0.5, 2, 1};
  const auto path = simulate_prior(s, std::vector<double>{1.0, 0.0}, cfg, zero_wiener(cfg, 1));
  std::ostringstream os;
  write_path_csv(path, 1, os);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header == "t,z_1,p_1");
  int rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  CHECK(rows == 3);
}
