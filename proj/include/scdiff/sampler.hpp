#pragma once

#include <cstdint>
#include <vector>

#include "scdiff/checkpoint.hpp"
#include "scdiff/dataset.hpp"
#include "scdiff/schedule.hpp"

namespace scdiff {

/// Sub-sequence of denoising steps, stored ascending; sampling iterates it
/// from the back (tau.back() == T down to tau.front(), then to data space
/// via alpha_bar_0 == 1). eta in [0, 1] scales per-step stochasticity:
/// 0 is deterministic, 1 recovers ancestral-style noise levels.
struct TauSchedule {
  std::vector<int> tau;
  double eta = 0.0;

  void validate(int T) const;  // throws InvalidSteps / InvalidEta
};

enum class TauMode { equidistant, quadratic };

/// Builds tau with n_steps entries ending exactly at T. Equidistant:
/// round(k*T/n_steps); quadratic: round(T*(k/n_steps)^2) clamped to >= 1
/// (denser near the low-noise end). Duplicates after rounding collapse, so
/// the result may be shorter than n_steps. Rounding is half-away-from-zero.
TauSchedule make_tau(int T, int n_steps, TauMode mode);

enum class SampleMethod { ddpm, ddim };

struct SampleRequest {
  int n_samples = 1;
  SampleMethod method = SampleMethod::ddpm;
  TauSchedule tau;  // ddim only
  uint64_t seed = 0;
  bool postprocess = true;  // truncate negatives after the final step
};

/// One ancestral step x_t -> x_{t-1}:
///   (x_t - (1-alpha_t)/sqrt(1-alpha_bar_t) * eps_hat) / sqrt(alpha_t)
///     + sqrt(beta_t) * z.
/// The caller passes z = 0 at t = 1 (the final step adds no noise); a
/// nonzero z there is rejected.
Matrix ddpm_step(const Matrix& xt, int t, const Matrix& eps_hat,
                 const Matrix& z, const NoiseSchedule& s);

/// Per-step noise scale eta * sqrt((1-ab_prev)/(1-ab_t)) *
/// sqrt(1 - ab_t/ab_prev) for a jump whose endpoints have cumulative
/// products ab_t < ab_prev.
double ddim_sigma(double ab_prev, double ab_t, double eta);

/// One accelerated step x_{tau_i} -> x_{tau_prev} (tau_prev may be 0,
/// meaning data space):
///   sqrt(ab_prev) * pred_x0 + sqrt(1 - ab_prev - sigma^2) * eps_hat
///     + sigma * z,
/// where pred_x0 = (x - sqrt(1-ab_t) * eps_hat) / sqrt(ab_t).
Matrix ddim_step(const Matrix& x, int tau_i, int tau_prev,
                 const Matrix& eps_hat, const Matrix& z, double eta,
                 const NoiseSchedule& s);

struct SampleResult {
  ExpressionMatrix matrix;
  int64_t denoiser_calls = 0;
  double wall_clock_s = 0.0;
};

/// Draws x_T ~ N(0, I) and runs the reverse process to x_0. Row i of the
/// output consumes only the stream split(seed, i), so results do not
/// depend on how rows might be batched. One denoiser call per step for
/// the whole batch.
SampleResult sample(const CheckpointBundle& bundle, const SampleRequest& req);

}  // namespace scdiff
