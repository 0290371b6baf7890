#pragma once

#include "scdiff/common.hpp"

namespace scdiff {

/// Forward-process noise schedule. Vectors are length T with index 0
/// holding step t = 1; the 1-based accessors below do the shift, and
/// alpha_bar_at(0) == 1 by convention so the t = 1 posterior and the final
/// accelerated jump to data space are well defined.
struct NoiseSchedule {
  int T = 0;
  Vector beta;        // β_t, strictly increasing in (0, 1)
  Vector alpha;       // α_t = 1 − β_t
  Vector alpha_bar;   // ᾱ_t = Π_{i≤t} α_i, strictly decreasing
  Vector beta_tilde;  // β̃_t = (1 − ᾱ_{t−1})/(1 − ᾱ_t)·β_t; β̃_1 = 0

  double beta_at(int t) const;
  double alpha_at(int t) const;
  double alpha_bar_at(int t) const;  // accepts t = 0, returns 1
  double beta_tilde_at(int t) const;
};

/// β_t interpolated linearly from beta_start to beta_end inclusive.
/// Defaults follow the usual 1000-step DDPM convention.
NoiseSchedule linear_schedule(int T = 1000, double beta_start = 1e-4,
                              double beta_end = 0.02);

/// Closed-form forward noising: x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·eps.
Matrix q_sample(const Matrix& x0, int t, const Matrix& eps,
                const NoiseSchedule& s);

/// Mean of the true reverse conditional q(x_{t−1} | x_t, x0):
///   (√ᾱ_{t−1}·β_t/(1−ᾱ_t))·x0 + (√α_t·(1−ᾱ_{t−1})/(1−ᾱ_t))·x_t.
/// Defined for t = 1 via ᾱ_0 ≡ 1 (reduces to x0).
Matrix posterior_mean(const Matrix& x0, const Matrix& xt, int t,
                      const NoiseSchedule& s);

}  // namespace scdiff
