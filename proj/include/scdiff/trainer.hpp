#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scdiff/denoiser.hpp"
#include "scdiff/rng.hpp"
#include "scdiff/schedule.hpp"

namespace scdiff {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 64;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 0;
  int checkpoint_every = 0;  // epochs between checkpoints; 0 = final only
  int log_every = 1;         // epochs between loss-history prints

  void validate() const;  // throws InvalidConfig
};

/// First/second-moment optimizer buffers, parallel to model.parameters().
struct AdamState {
  int64_t step = 0;
  std::vector<Matrix> m, v;
};

void init_adam(AdamState& state, const std::vector<Tensor>& params);

/// One update p -= lr * m_hat / (sqrt(v_hat) + eps) with bias-corrected
/// moments, consuming the current grad of each parameter.
void adam_step(std::vector<Tensor>& params, AdamState& state,
               double learning_rate, double beta1, double beta2, double eps);

/// i.i.d. uniform draws from {1, ..., T}.
std::vector<int> draw_timesteps(int batch_size, int T, Rng& rng);

/// Mean over all batch elements of the squared residual to eps.
Tensor mse_loss(const Tensor& eps_hat, const Matrix& eps);

/// Noise x0 with per-row timesteps via the closed form, predict, and score:
/// mean |eps - eps_theta(q_sample(x0, t, eps), t)|^2.
Tensor diffusion_loss(const DenoiserModel& model, const Matrix& x0,
                      const std::vector<int>& t, const Matrix& eps,
                      const NoiseSchedule& s);

/// Everything mutable about an in-flight run: completed epoch count, the
/// optimizer buffers, the position of the RNG stream, and the loss curve.
/// Saving this plus a model checkpoint at an epoch boundary allows exact
/// resumption.
struct TrainState {
  int epochs_done = 0;
  AdamState adam;
  Rng rng{0};
  std::vector<double> loss_history;  // one mean loss per completed epoch
};

TrainState init_train_state(const DenoiserModel& model, const TrainConfig& cfg);

/// Called after each completed epoch (1-based) with that epoch's mean loss.
using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Runs n_epochs more epochs: per epoch one seeded shuffle of the cells,
/// then minibatches with one fresh (t, eps) pair per cell. Mutates the
/// model's parameters and the state. Bit-reproducible given seed.
void train_epochs(DenoiserModel& model, TrainState& state, const Matrix& data,
                  const NoiseSchedule& s, const TrainConfig& cfg, int n_epochs,
                  const EpochCallback& on_epoch = nullptr);

/// Full run from scratch per cfg.epochs; returns the final state.
TrainState train(DenoiserModel& model, const Matrix& data,
                 const NoiseSchedule& s, const TrainConfig& cfg,
                 const EpochCallback& on_epoch = nullptr);

// Trainer-state file (magic "SCTS"): pairs with a model checkpoint written
// at the same epoch boundary.
void save_train_state(const std::string& path, const TrainState& state);
TrainState load_train_state(const std::string& path,
                            const DenoiserModel& model);

}  // namespace scdiff
