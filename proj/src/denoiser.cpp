#include "scdiff/denoiser.hpp"

#include <cmath>
#include <string>

#include "scdiff/errors.hpp"

namespace scdiff {

namespace {

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng, double scale) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * rng.gaussian();
  return m;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return matmul(x, w) + b;  // bias row broadcast over tokens
}

/// x * (1 + scale) + shift with scale/shift rows broadcast over tokens.
Tensor modulate(const Tensor& x, const Tensor& shift, const Tensor& scale_row) {
  Tensor ones = Tensor::constant(Matrix::Ones(1, scale_row.cols()));
  return mul(x, ones + scale_row) + shift;
}

Tensor attention(const DenoiserModel::Block& blk, const Tensor& x,
                 Index n_heads) {
  const Index h = x.cols();
  const Index hd = h / n_heads;
  Tensor q = linear(x, blk.wq, blk.bq);
  Tensor k = linear(x, blk.wk, blk.bk);
  Tensor v = linear(x, blk.wv, blk.bv);
  std::vector<Tensor> heads;
  heads.reserve(static_cast<std::size_t>(n_heads));
  for (Index i = 0; i < n_heads; ++i) {
    Tensor qi = slice_cols(q, i * hd, hd);
    Tensor ki = slice_cols(k, i * hd, hd);
    Tensor vi = slice_cols(v, i * hd, hd);
    Tensor scores = matmul(qi, transpose(ki)) * (1.0 / std::sqrt(static_cast<double>(hd)));
    heads.push_back(matmul(softmax_lastdim(scores), vi));
  }
  return linear(concat_cols(heads), blk.wo, blk.bo);
}

}  // namespace

void DenoiserConfig::validate() const {
  if (n_genes < 1) throw InvalidConfig("n_genes must be positive");
  if (patch_size < 1) throw InvalidConfig("patch_size must be positive");
  if (hidden_size < 2 || hidden_size % 2 != 0)
    throw InvalidConfig("hidden_size must be a positive even number");
  if (n_blocks < 1) throw InvalidConfig("n_blocks must be positive");
  if (n_heads < 1 || hidden_size % n_heads != 0)
    throw InvalidConfig("hidden_size must be divisible by n_heads");
  if (!(mlp_ratio > 0.0)) throw InvalidConfig("mlp_ratio must be positive");
  if (mlp_dim() < 1) throw InvalidConfig("mlp dimension must be positive");
}

std::vector<std::pair<std::string, Tensor>> DenoiserModel::named_parameters()
    const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("patch_w", patch_w);
  out.emplace_back("patch_b", patch_b);
  out.emplace_back("pos_embed", pos_embed);
  out.emplace_back("t_w1", t_w1);
  out.emplace_back("t_b1", t_b1);
  out.emplace_back("t_w2", t_w2);
  out.emplace_back("t_b2", t_b2);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    const Block& b = blocks[i];
    out.emplace_back(p + "wq", b.wq);
    out.emplace_back(p + "bq", b.bq);
    out.emplace_back(p + "wk", b.wk);
    out.emplace_back(p + "bk", b.bk);
    out.emplace_back(p + "wv", b.wv);
    out.emplace_back(p + "bv", b.bv);
    out.emplace_back(p + "wo", b.wo);
    out.emplace_back(p + "bo", b.bo);
    out.emplace_back(p + "mlp_w1", b.mlp_w1);
    out.emplace_back(p + "mlp_b1", b.mlp_b1);
    out.emplace_back(p + "mlp_w2", b.mlp_w2);
    out.emplace_back(p + "mlp_b2", b.mlp_b2);
    out.emplace_back(p + "mod_w", b.mod_w);
    out.emplace_back(p + "mod_b", b.mod_b);
  }
  out.emplace_back("final_mod_w", final_mod_w);
  out.emplace_back("final_mod_b", final_mod_b);
  out.emplace_back("final_w", final_w);
  out.emplace_back("final_b", final_b);
  return out;
}

std::vector<Tensor> DenoiserModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

DenoiserModel init_denoiser(const DenoiserConfig& cfg, Rng& rng) {
  cfg.validate();
  const Index p = cfg.patch_size, h = cfg.hidden_size, m = cfg.mlp_dim();
  const double s = 0.02;
  DenoiserModel model;
  model.cfg = cfg;
  model.patch_w = Tensor::parameter(gaussian_matrix(p, h, rng, s));
  model.patch_b = Tensor::parameter(Matrix::Zero(1, h));
  model.pos_embed = Tensor::parameter(gaussian_matrix(cfg.n_tokens(), h, rng, s));
  model.t_w1 = Tensor::parameter(gaussian_matrix(h, h, rng, s));
  model.t_b1 = Tensor::parameter(Matrix::Zero(1, h));
  model.t_w2 = Tensor::parameter(gaussian_matrix(h, h, rng, s));
  model.t_b2 = Tensor::parameter(Matrix::Zero(1, h));
  for (Index i = 0; i < cfg.n_blocks; ++i) {
    DenoiserModel::Block b;
    b.wq = Tensor::parameter(gaussian_matrix(h, h, rng, s));
    b.bq = Tensor::parameter(Matrix::Zero(1, h));
    b.wk = Tensor::parameter(gaussian_matrix(h, h, rng, s));
    b.bk = Tensor::parameter(Matrix::Zero(1, h));
    b.wv = Tensor::parameter(gaussian_matrix(h, h, rng, s));
    b.bv = Tensor::parameter(Matrix::Zero(1, h));
    b.wo = Tensor::parameter(gaussian_matrix(h, h, rng, s));
    b.bo = Tensor::parameter(Matrix::Zero(1, h));
    b.mlp_w1 = Tensor::parameter(gaussian_matrix(h, m, rng, s));
    b.mlp_b1 = Tensor::parameter(Matrix::Zero(1, m));
    b.mlp_w2 = Tensor::parameter(gaussian_matrix(m, h, rng, s));
    b.mlp_b2 = Tensor::parameter(Matrix::Zero(1, h));
    b.mod_w = Tensor::parameter(Matrix::Zero(h, 6 * h));
    b.mod_b = Tensor::parameter(Matrix::Zero(1, 6 * h));
    model.blocks.push_back(std::move(b));
  }
  model.final_mod_w = Tensor::parameter(Matrix::Zero(h, 2 * h));
  model.final_mod_b = Tensor::parameter(Matrix::Zero(1, 2 * h));
  model.final_w = Tensor::parameter(Matrix::Zero(h, p));
  model.final_b = Tensor::parameter(Matrix::Zero(1, p));
  return model;
}

void randomize_all(DenoiserModel& model, Rng& rng, double scale) {
  for (Tensor& t : model.parameters())
    t.value_mut() = gaussian_matrix(t.rows(), t.cols(), rng, scale);
}

Index param_count(const DenoiserConfig& cfg) {
  Index total = 0;
  Rng rng(0);
  // Shapes are what matters; reuse the constructor as the single source.
  for (const Tensor& t : init_denoiser(cfg, rng).parameters()) total += t.size();
  return total;
}

Matrix sinusoidal_embedding(int t, Index dim) {
  Matrix e(1, dim);
  const Index half = dim / 2;
  for (Index i = 0; i < half; ++i) {
    const double freq = std::pow(
        10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
    e(0, i) = std::sin(t * freq);
    e(0, half + i) = std::cos(t * freq);
  }
  return e;
}

Tensor embed_timestep(const DenoiserModel& model, int t, int T) {
  if (t < 1 || t > T)
    throw StepOutOfRange("embed_timestep: t = " + std::to_string(t) +
                         " outside [1, " + std::to_string(T) + "]");
  Tensor sin = Tensor::constant(sinusoidal_embedding(t, model.cfg.hidden_size));
  return linear(gelu(linear(sin, model.t_w1, model.t_b1)), model.t_w2,
                model.t_b2);
}

Tensor apply_block(const DenoiserModel::Block& blk, const Tensor& tokens,
                   const Tensor& cond, Index n_heads) {
  const Index h = tokens.cols();
  Tensor mod = linear(cond, blk.mod_w, blk.mod_b);  // 1 x 6h
  Tensor shift_att = slice_cols(mod, 0, h);
  Tensor scale_att = slice_cols(mod, h, h);
  Tensor gate_att = slice_cols(mod, 2 * h, h);
  Tensor shift_mlp = slice_cols(mod, 3 * h, h);
  Tensor scale_mlp = slice_cols(mod, 4 * h, h);
  Tensor gate_mlp = slice_cols(mod, 5 * h, h);

  Tensor x = tokens;
  Tensor att = attention(blk, modulate(layernorm_lastdim(x), shift_att, scale_att),
                         n_heads);
  x = x + mul(att, gate_att);
  Tensor mid = modulate(layernorm_lastdim(x), shift_mlp, scale_mlp);
  Tensor mlp = linear(gelu(linear(mid, blk.mlp_w1, blk.mlp_b1)), blk.mlp_w2,
                      blk.mlp_b2);
  return x + mul(mlp, gate_mlp);
}

Tensor forward(const DenoiserModel& model, const Tensor& x,
               const std::vector<int>& t, int T) {
  const DenoiserConfig& cfg = model.cfg;
  if (x.cols() != cfg.n_genes)
    throw ShapeMismatch("forward: input has " + std::to_string(x.cols()) +
                        " genes, model expects " + std::to_string(cfg.n_genes));
  if (static_cast<Index>(t.size()) != x.rows())
    throw ShapeMismatch("forward: batch of " + std::to_string(x.rows()) +
                        " rows but " + std::to_string(t.size()) + " timesteps");
  const Index h = cfg.hidden_size;
  std::vector<Tensor> outs;
  outs.reserve(t.size());
  for (Index b = 0; b < x.rows(); ++b) {
    Tensor cond = embed_timestep(model, t[static_cast<std::size_t>(b)], T);
    Tensor row = slice_rows(x, b, 1);
    Tensor padded = pad_cols(row, cfg.padded_len());
    Tensor patches = reshape(padded, cfg.n_tokens(), cfg.patch_size);
    Tensor tokens = linear(patches, model.patch_w, model.patch_b) + model.pos_embed;
    for (const auto& blk : model.blocks)
      tokens = apply_block(blk, tokens, cond, cfg.n_heads);

    Tensor fmod = linear(cond, model.final_mod_w, model.final_mod_b);
    Tensor shift = slice_cols(fmod, 0, h);
    Tensor scl = slice_cols(fmod, h, h);
    Tensor normed = modulate(layernorm_lastdim(tokens), shift, scl);
    Tensor per_patch = linear(normed, model.final_w, model.final_b);  // tokens x p
    Tensor flat = reshape(per_patch, 1, cfg.padded_len());
    outs.push_back(slice_cols(flat, 0, cfg.n_genes));
  }
  return outs.size() == 1 ? outs[0] : concat_rows(outs);
}

Matrix forward_inference(const DenoiserModel& model, const Matrix& x,
                         const std::vector<int>& t, int T) {
  NoGradGuard guard;
  return forward(model, Tensor::constant(x), t, T).value();
}

}  // namespace scdiff
