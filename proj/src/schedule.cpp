#include "scdiff/schedule.hpp"

#include <cmath>
#include <string>

#include "scdiff/errors.hpp"

namespace scdiff {

namespace {

void check_step(int t, int T, const char* where) {
  if (t < 1 || t > T)
    throw StepOutOfRange(std::string(where) + ": t = " + std::to_string(t) +
                         " outside [1, " + std::to_string(T) + "]");
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* where) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeMismatch(std::string(where) + ": " + std::to_string(a.rows()) +
                        "x" + std::to_string(a.cols()) + " vs " +
                        std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
}

}  // namespace

double NoiseSchedule::beta_at(int t) const {
  check_step(t, T, "beta_at");
  return beta(t - 1);
}

double NoiseSchedule::alpha_at(int t) const {
  check_step(t, T, "alpha_at");
  return alpha(t - 1);
}

double NoiseSchedule::alpha_bar_at(int t) const {
  if (t == 0) return 1.0;
  check_step(t, T, "alpha_bar_at");
  return alpha_bar(t - 1);
}

double NoiseSchedule::beta_tilde_at(int t) const {
  check_step(t, T, "beta_tilde_at");
  return beta_tilde(t - 1);
}

NoiseSchedule linear_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw InvalidRange("schedule length T must be >= 1");
  if (!(beta_start > 0.0) || !(beta_end < 1.0) ||
      (T > 1 && !(beta_start < beta_end)) || !(beta_start <= beta_end))
    throw InvalidRange("need 0 < beta_start < beta_end < 1");

  NoiseSchedule s;
  s.T = T;
  s.beta.resize(T);
  if (T == 1) {
    s.beta(0) = beta_start;
  } else {
    for (int t = 0; t < T; ++t)
      s.beta(t) = beta_start +
                  (beta_end - beta_start) * static_cast<double>(t) /
                      static_cast<double>(T - 1);
  }
  s.alpha = 1.0 - s.beta.array();
  s.alpha_bar.resize(T);
  s.beta_tilde.resize(T);
  double prod = 1.0;
  for (int t = 0; t < T; ++t) {
    const double prev = prod;  // ᾱ_{t−1}, with ᾱ_0 = 1
    prod *= s.alpha(t);
    s.alpha_bar(t) = prod;
    s.beta_tilde(t) = (1.0 - prev) / (1.0 - prod) * s.beta(t);
  }
  return s;
}

Matrix q_sample(const Matrix& x0, int t, const Matrix& eps,
                const NoiseSchedule& s) {
  check_step(t, s.T, "q_sample");
  check_same_shape(x0, eps, "q_sample");
  const double ab = s.alpha_bar_at(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

Matrix posterior_mean(const Matrix& x0, const Matrix& xt, int t,
                      const NoiseSchedule& s) {
  check_step(t, s.T, "posterior_mean");
  check_same_shape(x0, xt, "posterior_mean");
  const double ab_prev = s.alpha_bar_at(t - 1);
  const double ab = s.alpha_bar_at(t);
  const double beta = s.beta_at(t);
  const double alpha = s.alpha_at(t);
  const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
  const double ct = std::sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab);
  return c0 * x0 + ct * xt;
}

}  // namespace scdiff
