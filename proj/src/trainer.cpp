#include "scdiff/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "scdiff/binio.hpp"
#include "scdiff/errors.hpp"

namespace scdiff {

namespace {

constexpr char kStateMagic[4] = {'S', 'C', 'T', 'S'};
constexpr uint32_t kStateVersion = 1;

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidConfig("epochs must be at least 1");
  if (batch_size < 1) throw InvalidConfig("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw InvalidConfig("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw InvalidConfig("moment decays must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw InvalidConfig("optimizer epsilon must be positive");
  if (checkpoint_every < 0) throw InvalidConfig("checkpoint_every must be >= 0");
  if (log_every < 0) throw InvalidConfig("log_every must be >= 0");
}

void init_adam(AdamState& state, const std::vector<Tensor>& params) {
  state.step = 0;
  state.m.clear();
  state.v.clear();
  for (const Tensor& p : params) {
    state.m.push_back(Matrix::Zero(p.rows(), p.cols()));
    state.v.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void adam_step(std::vector<Tensor>& params, AdamState& state,
               double learning_rate, double beta1, double beta2, double eps) {
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw ShapeMismatch("optimizer state does not match parameter list");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix g = params[i].grad();
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    m = beta1 * m + (1.0 - beta1) * g;
    v.array() = beta2 * v.array() + (1.0 - beta2) * g.array().square();
    const Matrix m_hat = m / bc1;
    const Matrix v_hat = v / bc2;
    params[i].value_mut().array() -=
        learning_rate * m_hat.array() / (v_hat.array().sqrt() + eps);
  }
}

std::vector<int> draw_timesteps(int batch_size, int T, Rng& rng) {
  std::vector<int> t(static_cast<std::size_t>(batch_size));
  for (auto& x : t)
    x = static_cast<int>(rng.uniform_int(1, static_cast<uint64_t>(T)));
  return t;
}

Tensor mse_loss(const Tensor& eps_hat, const Matrix& eps) {
  if (eps_hat.rows() != eps.rows() || eps_hat.cols() != eps.cols())
    throw ShapeMismatch("mse_loss: prediction and target shapes differ");
  Tensor diff = eps_hat - Tensor::constant(eps);
  return mean_all(mul(diff, diff));
}

Tensor diffusion_loss(const DenoiserModel& model, const Matrix& x0,
                      const std::vector<int>& t, const Matrix& eps,
                      const NoiseSchedule& s) {
  if (x0.rows() != eps.rows() || x0.cols() != eps.cols())
    throw ShapeMismatch("diffusion_loss: x0 and eps shapes differ");
  Matrix xt(x0.rows(), x0.cols());
  for (Index i = 0; i < x0.rows(); ++i) {
    const double ab = s.alpha_bar_at(t[static_cast<std::size_t>(i)]);
    xt.row(i) = std::sqrt(ab) * x0.row(i) + std::sqrt(1.0 - ab) * eps.row(i);
  }
  return mse_loss(forward(model, Tensor::constant(xt), t, s.T), eps);
}

TrainState init_train_state(const DenoiserModel& model,
                            const TrainConfig& cfg) {
  TrainState state;
  init_adam(state.adam, model.parameters());
  state.rng = Rng(cfg.seed);
  return state;
}

void train_epochs(DenoiserModel& model, TrainState& state, const Matrix& data,
                  const NoiseSchedule& s, const TrainConfig& cfg, int n_epochs,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.rows() < 1) throw EmptyMatrix("training matrix has no cells");
  if (data.cols() != model.cfg.n_genes)
    throw ShapeMismatch("training matrix has " + std::to_string(data.cols()) +
                        " genes, model expects " +
                        std::to_string(model.cfg.n_genes));
  auto params = model.parameters();
  const Index n_cells = data.rows();
  const Index n = data.cols();
  std::vector<Index> order(static_cast<std::size_t>(n_cells));

  for (int e = 0; e < n_epochs; ++e) {
    const int epoch = state.epochs_done + 1;
    // Seeded Fisher-Yates pass over the cell order.
    std::iota(order.begin(), order.end(), Index{0});
    for (Index i = n_cells - 1; i > 0; --i) {
      const auto j = static_cast<Index>(
          state.rng.uniform_int(0, static_cast<uint64_t>(i)));
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(j)]);
    }

    double loss_sum = 0.0;  // element-weighted across uneven batches
    Index elems = 0;
    for (Index start = 0; start < n_cells; start += cfg.batch_size) {
      const Index bs = std::min<Index>(cfg.batch_size, n_cells - start);
      Matrix x0(bs, n), eps(bs, n);
      for (Index b = 0; b < bs; ++b)
        x0.row(b) = data.row(order[static_cast<std::size_t>(start + b)]);
      std::vector<int> t =
          draw_timesteps(static_cast<int>(bs), s.T, state.rng);
      for (Index i = 0; i < bs; ++i)
        for (Index j = 0; j < n; ++j) eps(i, j) = state.rng.gaussian();

      try {
        Tensor l = diffusion_loss(model, x0, t, eps, s);
        for (Tensor& p : params) p.zero_grad();
        backward(l);
        adam_step(params, state.adam, cfg.learning_rate, cfg.beta1, cfg.beta2,
                  cfg.adam_eps);
        loss_sum += l.scalar() * static_cast<double>(bs * n);
        elems += bs * n;
      } catch (const NonFinite& err) {
        throw NonFinite("epoch " + std::to_string(epoch) + ", batch at cell " +
                        std::to_string(start) + ": " + err.what());
      }
    }
    const double mean_loss = loss_sum / static_cast<double>(elems);
    state.loss_history.push_back(mean_loss);
    state.epochs_done = epoch;
    if (on_epoch) on_epoch(epoch, mean_loss);
  }
}

TrainState train(DenoiserModel& model, const Matrix& data,
                 const NoiseSchedule& s, const TrainConfig& cfg,
                 const EpochCallback& on_epoch) {
  TrainState state = init_train_state(model, cfg);
  train_epochs(model, state, data, s, cfg, cfg.epochs, on_epoch);
  return state;
}

void save_train_state(const std::string& path, const TrainState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  BinaryWriter w(out);
  w.bytes(kStateMagic, 4);
  w.u32(kStateVersion);
  w.u64(static_cast<uint64_t>(state.epochs_done));
  w.u64(static_cast<uint64_t>(state.adam.step));
  uint64_t rng_state[4];
  state.rng.state(rng_state);
  for (uint64_t word : rng_state) w.u64(word);
  w.u32(static_cast<uint32_t>(state.loss_history.size()));
  for (double l : state.loss_history) w.f64(l);
  w.u32(static_cast<uint32_t>(state.adam.m.size()));
  for (std::size_t i = 0; i < state.adam.m.size(); ++i) {
    w.u64(static_cast<uint64_t>(state.adam.m[i].rows()));
    w.u64(static_cast<uint64_t>(state.adam.m[i].cols()));
    w.matrix(state.adam.m[i]);
    w.matrix(state.adam.v[i]);
  }
  if (!out) throw IoError("error while writing '" + path + "'");
}

TrainState load_train_state(const std::string& path,
                            const DenoiserModel& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  BinaryReader r(in);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kStateMagic, 4))
    throw ParseError("'" + path + "' is not a trainer state file (bad magic)");
  if (r.u32() != kStateVersion)
    throw ParseError("unsupported trainer state version");

  TrainState state;
  state.epochs_done = static_cast<int>(r.u64());
  state.adam.step = static_cast<int64_t>(r.u64());
  uint64_t rng_state[4];
  for (auto& word : rng_state) word = r.u64();
  state.rng.set_state(rng_state);
  const uint32_t n_losses = r.u32();
  for (uint32_t i = 0; i < n_losses; ++i)
    state.loss_history.push_back(r.f64());

  const auto params = model.parameters();
  const uint32_t count = r.u32();
  if (count != params.size())
    throw ParseError("state holds " + std::to_string(count) +
                     " moment pairs, model has " +
                     std::to_string(params.size()) + " parameters");
  for (const Tensor& p : params) {
    const auto rows = static_cast<Index>(r.u64());
    const auto cols = static_cast<Index>(r.u64());
    if (rows != p.rows() || cols != p.cols())
      throw ParseError("optimizer moment shape does not match its parameter");
    Matrix m(rows, cols), v(rows, cols);
    r.matrix_into(m);
    r.matrix_into(v);
    state.adam.m.push_back(std::move(m));
    state.adam.v.push_back(std::move(v));
  }
  return state;
}

}  // namespace scdiff
