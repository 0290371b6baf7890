#pragma once

#include <string>
#include <utility>
#include <vector>

#include "scdiff/common.hpp"
#include "scdiff/rng.hpp"
#include "scdiff/tensor.hpp"

namespace scdiff {

struct DenoiserConfig {
  Index n_genes = 0;
  Index patch_size = 4;
  Index hidden_size = 128;
  Index n_blocks = 6;
  Index n_heads = 8;
  double mlp_ratio = 4.0;

  Index n_tokens() const {  // input zero-padded up to a whole patch count
    return (n_genes + patch_size - 1) / patch_size;
  }
  Index padded_len() const { return n_tokens() * patch_size; }
  Index mlp_dim() const {
    return static_cast<Index>(static_cast<double>(hidden_size) * mlp_ratio);
  }
  void validate() const;  // throws InvalidConfig

  bool operator==(const DenoiserConfig&) const = default;
};

/// Transformer noise predictor eps_hat(x_t, t). Tokens are linear
/// embeddings of contiguous patches plus learned positional embeddings;
/// the timestep enters every block through adaptive layernorm: a zero-init
/// linear map from the timestep embedding produces per-block
/// (shift, scale, gate) pairs, so at initialization each block is the
/// identity and the (also zero-init) output head returns exactly zero.
struct DenoiserModel {
  DenoiserConfig cfg;

  Tensor patch_w, patch_b;  // patch -> hidden
  Tensor pos_embed;         // n_tokens x hidden, learned
  Tensor t_w1, t_b1, t_w2, t_b2;  // timestep-embedding MLP

  struct Block {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;      // self-attention
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;      // pointwise MLP
    Tensor mod_w, mod_b;                        // cond -> 6 x hidden, zero-init
  };
  std::vector<Block> blocks;

  Tensor final_mod_w, final_mod_b;  // cond -> 2 x hidden, zero-init
  Tensor final_w, final_b;          // hidden -> patch, zero-init

  /// Parameters in a fixed documented order (serialization + optimizer
  /// state pair up by position).
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::vector<Tensor> parameters() const;
};

/// Gaussian(0, 0.02) weights, zero biases, zero modulation/output head.
DenoiserModel init_denoiser(const DenoiserConfig& cfg, Rng& rng);

/// Test-only initialization with every parameter (including gates and the
/// output head) drawn Gaussian(0, scale), so conditioning and all paths
/// are live from the start.
void randomize_all(DenoiserModel& model, Rng& rng, double scale = 0.05);

Index param_count(const DenoiserConfig& cfg);

/// Sinusoidal encoding of step t: h/2 frequency pairs 10000^(-2i/h),
/// first half sin(t*f_i), second half cos(t*f_i). Constant w.r.t. grads.
Matrix sinusoidal_embedding(int t, Index dim);

/// Conditioning vector (1 x hidden): sinusoid passed through the 2-layer
/// GELU MLP. 1 <= t <= T enforced.
Tensor embed_timestep(const DenoiserModel& model, int t, int T);

/// One DiT block applied to tokens (n_tokens x hidden) under conditioning
/// cond (1 x hidden). Exposed for the identity-at-init test.
Tensor apply_block(const DenoiserModel::Block& blk, const Tensor& tokens,
                   const Tensor& cond, Index n_heads);

/// Predicted noise for a batch: x is (B x n_genes), t has B entries.
/// Differentiable w.r.t. model parameters.
Tensor forward(const DenoiserModel& model, const Tensor& x,
               const std::vector<int>& t, int T);

/// Inference-only forward on plain matrices (no graph construction).
Matrix forward_inference(const DenoiserModel& model, const Matrix& x,
                         const std::vector<int>& t, int T);

}  // namespace scdiff
