#include "scdiff/sampler.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "scdiff/denoiser.hpp"
#include "scdiff/errors.hpp"
#include "scdiff/rng.hpp"

namespace scdiff {

namespace {

void check_step(int t, int T, const char* where) {
  if (t < 1 || t > T)
    throw StepOutOfRange(std::string(where) + ": t = " + std::to_string(t) +
                         " outside [1, " + std::to_string(T) + "]");
}

}  // namespace

void TauSchedule::validate(int T) const {
  if (tau.empty()) throw InvalidSteps("tau is empty");
  if (!(eta >= 0.0 && eta <= 1.0))
    throw InvalidEta("eta must lie in [0, 1], got " + std::to_string(eta));
  int prev = 0;
  for (int t : tau) {
    if (t <= prev)
      throw InvalidSteps("tau must be strictly increasing within [1, T]");
    if (t > T)
      throw InvalidSteps("tau entry " + std::to_string(t) + " exceeds T = " +
                         std::to_string(T));
    prev = t;
  }
  if (tau.back() != T)
    throw InvalidSteps("tau must end at T so sampling starts from x_T");
}

TauSchedule make_tau(int T, int n_steps, TauMode mode) {
  if (T < 1) throw InvalidSteps("T must be positive");
  if (n_steps < 1 || n_steps > T)
    throw InvalidSteps("n_steps must lie in [1, T], got " +
                       std::to_string(n_steps));
  TauSchedule out;
  for (int k = 1; k <= n_steps; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(n_steps);
    long long t;
    if (mode == TauMode::equidistant)
      t = std::llround(frac * static_cast<double>(T));
    else
      t = std::llround(frac * frac * static_cast<double>(T));
    if (t < 1) t = 1;
    if (out.tau.empty() || static_cast<int>(t) != out.tau.back())
      out.tau.push_back(static_cast<int>(t));
  }
  return out;  // k = n_steps lands on T exactly in both modes
}

Matrix ddpm_step(const Matrix& xt, int t, const Matrix& eps_hat,
                 const Matrix& z, const NoiseSchedule& s) {
  check_step(t, s.T, "ddpm_step");
  if (xt.rows() != eps_hat.rows() || xt.cols() != eps_hat.cols() ||
      xt.rows() != z.rows() || xt.cols() != z.cols())
    throw ShapeMismatch("ddpm_step: x_t, eps_hat and z shapes must agree");
  if (t == 1 && z.cwiseAbs().maxCoeff() != 0.0)
    throw InvalidConfig("ddpm_step: the final step (t = 1) must use z = 0");
  const double a = s.alpha_at(t);
  const double ab = s.alpha_bar_at(t);
  const double sigma = std::sqrt(s.beta_at(t));
  return (xt - ((1.0 - a) / std::sqrt(1.0 - ab)) * eps_hat) / std::sqrt(a) +
         sigma * z;
}

double ddim_sigma(double ab_prev, double ab_t, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0))
    throw InvalidEta("eta must lie in [0, 1], got " + std::to_string(eta));
  if (!(ab_prev > ab_t))
    throw InvalidRange("ddim_sigma: need alpha_bar_prev > alpha_bar_t");
  return eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab_t)) *
         std::sqrt(1.0 - ab_t / ab_prev);
}

Matrix ddim_step(const Matrix& x, int tau_i, int tau_prev,
                 const Matrix& eps_hat, const Matrix& z, double eta,
                 const NoiseSchedule& s) {
  check_step(tau_i, s.T, "ddim_step");
  if (tau_prev < 0 || tau_prev >= tau_i)
    throw StepOutOfRange("ddim_step: need 0 <= tau_prev < tau_i");
  if (x.rows() != eps_hat.rows() || x.cols() != eps_hat.cols() ||
      x.rows() != z.rows() || x.cols() != z.cols())
    throw ShapeMismatch("ddim_step: x, eps_hat and z shapes must agree");
  const double ab = s.alpha_bar_at(tau_i);
  const double ab_prev = s.alpha_bar_at(tau_prev);
  const double sigma = ddim_sigma(ab_prev, ab, eta);
  const double radicand = 1.0 - ab_prev - sigma * sigma;
  if (radicand < 0.0)
    throw NegativeRadicand(
        "ddim_step: noise scale exceeds the remaining variance");
  Matrix pred_x0 = (x - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab);
  return std::sqrt(ab_prev) * pred_x0 + std::sqrt(radicand) * eps_hat +
         sigma * z;
}

SampleResult sample(const CheckpointBundle& bundle, const SampleRequest& req) {
  if (req.n_samples < 1)
    throw InvalidConfig("n_samples must be at least 1");
  const NoiseSchedule& s = bundle.schedule;
  const DenoiserModel& model = bundle.model;
  const Index n = model.cfg.n_genes;
  const Index rows = req.n_samples;
  if (static_cast<Index>(bundle.preprocess.selected_genes.size()) != n)
    throw InvalidSpec("checkpoint names " +
                      std::to_string(bundle.preprocess.selected_genes.size()) +
                      " genes for a " + std::to_string(n) + "-gene model");

  std::vector<int> steps;  // descending visit order
  double eta = 1.0;
  if (req.method == SampleMethod::ddim) {
    req.tau.validate(s.T);
    steps.assign(req.tau.tau.rbegin(), req.tau.tau.rend());
    eta = req.tau.eta;
  } else {
    for (int t = s.T; t >= 1; --t) steps.push_back(t);
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Rng> stream;
  stream.reserve(static_cast<std::size_t>(rows));
  for (Index i = 0; i < rows; ++i)
    stream.push_back(Rng::split(req.seed, static_cast<uint64_t>(i)));

  Matrix x(rows, n);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < n; ++j) x(i, j) = stream[static_cast<std::size_t>(i)].gaussian();

  SampleResult res;
  Matrix z(rows, n);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const int t = steps[k];
    try {
      const std::vector<int> t_batch(static_cast<std::size_t>(rows), t);
      Matrix eps_hat = forward_inference(model, x, t_batch, s.T);
      res.denoiser_calls += 1;
      if (req.method == SampleMethod::ddpm) {
        if (t > 1) {
          for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < n; ++j)
              z(i, j) = stream[static_cast<std::size_t>(i)].gaussian();
        } else {
          z.setZero();
        }
        x = ddpm_step(x, t, eps_hat, z, s);
      } else {
        const int prev = k + 1 < steps.size() ? steps[k + 1] : 0;
        const double sigma =
            ddim_sigma(s.alpha_bar_at(prev), s.alpha_bar_at(t), eta);
        if (sigma > 0.0) {
          for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < n; ++j)
              z(i, j) = stream[static_cast<std::size_t>(i)].gaussian();
        } else {
          z.setZero();
        }
        x = ddim_step(x, t, prev, eps_hat, z, eta, s);
      }
    } catch (const NonFinite& err) {
      throw NonFinite("sampling step t = " + std::to_string(t) + ": " +
                      err.what());
    }
  }

  if (req.postprocess) x = truncate_negatives(x);
  res.matrix.values = std::move(x);
  res.matrix.gene_names = bundle.preprocess.selected_genes;
  for (Index i = 0; i < rows; ++i)
    res.matrix.cell_ids.push_back("sample_" + std::to_string(i));
  res.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

}  // namespace scdiff
