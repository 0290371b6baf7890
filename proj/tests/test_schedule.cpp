#include "scdiff/schedule.hpp"

#include <cmath>

#include "doctest.h"
#include "scdiff/errors.hpp"
#include "scdiff/rng.hpp"

using namespace scdiff;

TEST_CASE("two-step schedule matches hand products") {
  auto s = linear_schedule(2, 0.1, 0.2);
  CHECK(s.beta_at(1) == 0.1);
  CHECK(s.beta_at(2) == 0.2);
  CHECK(s.alpha_at(1) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(s.alpha_at(2) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(s.alpha_bar_at(1) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(s.alpha_bar_at(2) == doctest::Approx(0.72).epsilon(1e-15));
  CHECK(s.alpha_bar_at(0) == 1.0);
  CHECK(s.beta_tilde_at(1) == 0.0);
  // (1−0.9)/(1−0.72)·0.2 = 0.1/0.28·0.2
  CHECK(s.beta_tilde_at(2) == doctest::Approx(0.1 / 0.28 * 0.2).epsilon(1e-15));
}

TEST_CASE("single-step schedule") {
  auto s = linear_schedule(1, 0.05, 0.05);
  CHECK(s.beta_at(1) == 0.05);
  CHECK(s.alpha_bar_at(1) == doctest::Approx(1 - 0.05).epsilon(1e-15));
  CHECK(s.beta_tilde_at(1) == 0.0);
}

TEST_CASE("default schedule shape and monotonicity") {
  auto s = linear_schedule();
  REQUIRE(s.T == 1000);
  CHECK(s.beta_at(1) == 1e-4);
  CHECK(s.beta_at(1000) == 0.02);
  for (int t = 2; t <= s.T; ++t) {
    CHECK(s.beta_at(t) > s.beta_at(t - 1));
    CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
  }
  CHECK(s.beta_at(s.T) < 1.0);
  CHECK(s.alpha_bar_at(s.T) > 0.0);
  CHECK(s.alpha_bar_at(1) < 1.0);
  // Recurrence ᾱ_t = ᾱ_{t−1}·α_t holds to relative 1e-15.
  for (int t = 1; t <= s.T; ++t) {
    const double lhs = s.alpha_bar_at(t);
    const double rhs = s.alpha_bar_at(t - 1) * s.alpha_at(t);
    CHECK(std::abs(lhs - rhs) <= 1e-15 * std::abs(rhs));
  }
  // β̃_t ≤ β_t everywhere.
  for (int t = 1; t <= s.T; ++t) CHECK(s.beta_tilde_at(t) <= s.beta_at(t));
}

TEST_CASE("running product agrees with exp of log-sum") {
  auto s = linear_schedule(500, 1e-4, 0.02);
  double logsum = 0.0;
  for (int t = 1; t <= s.T; ++t) {
    logsum += std::log(s.alpha_at(t));
    const double via_logs = std::exp(logsum);
    CHECK(std::abs(s.alpha_bar_at(t) - via_logs) <= 1e-12 * via_logs);
  }
}

TEST_CASE("schedule construction rejects bad ranges") {
  CHECK_THROWS_AS(linear_schedule(0, 0.1, 0.2), InvalidRange);
  CHECK_THROWS_AS(linear_schedule(10, 0.2, 0.1), InvalidRange);
  CHECK_THROWS_AS(linear_schedule(10, 0.2, 0.2), InvalidRange);
  CHECK_THROWS_AS(linear_schedule(10, 0.0, 0.2), InvalidRange);
  CHECK_THROWS_AS(linear_schedule(10, -0.1, 0.2), InvalidRange);
  CHECK_THROWS_AS(linear_schedule(10, 0.1, 1.0), InvalidRange);
}

TEST_CASE("accessors reject out-of-range steps") {
  auto s = linear_schedule(5, 0.01, 0.1);
  CHECK_THROWS_AS(s.beta_at(0), StepOutOfRange);
  CHECK_THROWS_AS(s.beta_at(6), StepOutOfRange);
  CHECK_THROWS_AS(s.alpha_bar_at(-1), StepOutOfRange);
  CHECK_THROWS_AS(s.alpha_bar_at(6), StepOutOfRange);
}

TEST_CASE("q_sample closed form") {
  NoiseSchedule s;
  s.T = 1;
  s.beta = Vector::Constant(1, 0.75);
  s.alpha = Vector::Constant(1, 0.25);
  s.alpha_bar = Vector::Constant(1, 0.25);
  s.beta_tilde = Vector::Zero(1);

  Matrix x0(1, 1), eps(1, 1);
  x0 << 2.0;
  eps << 1.0;
  Matrix xt = q_sample(x0, 1, eps, s);
  CHECK(xt(0, 0) == doctest::Approx(1.8660254037844386).epsilon(1e-15));

  Matrix zero = Matrix::Zero(1, 1);
  CHECK(q_sample(x0, 1, zero, s)(0, 0) == 1.0);  // √0.25·2 exactly

  CHECK_THROWS_AS(q_sample(x0, 0, eps, s), StepOutOfRange);
  CHECK_THROWS_AS(q_sample(x0, 2, eps, s), StepOutOfRange);
  Matrix wide(1, 2);
  wide << 1, 2;
  CHECK_THROWS_AS(q_sample(x0, 1, wide, s), ShapeMismatch);
}

TEST_CASE("q_sample moments match the closed form") {
  auto s = linear_schedule(10, 0.05, 0.3);
  const double x0v = 1.7;
  Matrix x0 = Matrix::Constant(1, 1, x0v);
  const int n = 100000;
  Rng rng(321);
  for (int t : {1, 5, 10}) {
    double sum = 0, sumsq = 0;
    for (int i = 0; i < n; ++i) {
      Matrix eps = Matrix::Constant(1, 1, rng.gaussian());
      const double v = q_sample(x0, t, eps, s)(0, 0);
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    const double want_mean = std::sqrt(s.alpha_bar_at(t)) * x0v;
    const double want_var = 1.0 - s.alpha_bar_at(t);
    const double se_mean = std::sqrt(want_var / n);
    const double se_var = want_var * std::sqrt(2.0 / (n - 1));
    CHECK(std::abs(mean - want_mean) < 3 * se_mean);
    CHECK(std::abs(var - want_var) < 3 * se_var);
  }
}

TEST_CASE("stepwise noising chain matches the closed form") {
  // Iterating x_t = √α_t·x_{t−1} + √β_t·ε_t must reproduce the single-shot
  // q_sample distribution.
  auto s = linear_schedule(10, 0.05, 0.3);
  const double x0v = -0.9;
  const int n = 100000;
  Rng rng(654);
  Vector x = Vector::Constant(n, x0v);
  for (int t = 1; t <= s.T; ++t) {
    for (int i = 0; i < n; ++i)
      x(i) = std::sqrt(s.alpha_at(t)) * x(i) +
             std::sqrt(s.beta_at(t)) * rng.gaussian();
  }
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  const double want_mean = std::sqrt(s.alpha_bar_at(s.T)) * x0v;
  const double want_var = 1.0 - s.alpha_bar_at(s.T);
  CHECK(std::abs(mean - want_mean) < 3 * std::sqrt(want_var / n));
  CHECK(std::abs(var - want_var) < 3 * want_var * std::sqrt(2.0 / (n - 1)));
}

TEST_CASE("posterior mean basics") {
  auto s = linear_schedule(4, 0.1, 0.4);
  Matrix zero = Matrix::Zero(2, 3);
  CHECK(posterior_mean(zero, zero, 3, s) == zero);

  // t = 1 is defined via ᾱ_0 ≡ 1 and collapses onto x0.
  Matrix x0 = Matrix::Constant(1, 2, 1.25);
  Matrix xt = Matrix::Constant(1, 2, -3.0);
  Matrix mu = posterior_mean(x0, xt, 1, s);
  CHECK(mu(0, 0) == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(mu(0, 1) == doctest::Approx(1.25).epsilon(1e-12));

  CHECK_THROWS_AS(posterior_mean(x0, xt, 0, s), StepOutOfRange);
  CHECK_THROWS_AS(posterior_mean(x0, xt, 5, s), StepOutOfRange);
  Matrix bad(2, 2);
  bad.setZero();
  CHECK_THROWS_AS(posterior_mean(x0, bad, 2, s), ShapeMismatch);
}

TEST_CASE("posterior mean stays x0-weighted for tiny betas") {
  auto s = linear_schedule(2, 1e-6, 2e-6);
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix x0 = Matrix::Constant(1, 1, rng.gaussian());
    Matrix eps = Matrix::Constant(1, 1, rng.gaussian());
    Matrix xt = q_sample(x0, 2, eps, s);
    Matrix mu = posterior_mean(x0, xt, 2, s);
    CHECK(std::abs(mu(0, 0) - x0(0, 0)) < 0.01);
  }
}

TEST_CASE("posterior mean equals the noise-parameterized reverse mean") {
  // With ε recovered from (x0, x_t) by inverting the closed form, the
  // posterior mean must equal (1/√α_t)(x_t − (1−α_t)/√(1−ᾱ_t)·ε).
  auto s = linear_schedule(50, 1e-3, 0.2);
  Rng rng(31);
  double max_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int t = 1 + static_cast<int>(rng.uniform_int(0, 49));
    Matrix x0(1, 3), eps(1, 3);
    for (int j = 0; j < 3; ++j) {
      x0(0, j) = 2 * rng.gaussian();
      eps(0, j) = rng.gaussian();
    }
    Matrix xt = q_sample(x0, t, eps, s);
    Matrix mu = posterior_mean(x0, xt, t, s);
    const double a = s.alpha_at(t);
    const double ab = s.alpha_bar_at(t);
    Matrix ddpm_mean =
        (xt - ((1.0 - a) / std::sqrt(1.0 - ab)) * eps) / std::sqrt(a);
    max_err = std::max(max_err, (mu - ddpm_mean).cwiseAbs().maxCoeff());
  }
  CHECK(max_err < 1e-10);
}
