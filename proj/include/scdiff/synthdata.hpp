#pragma once

#include <cstdint>
#include <vector>

#include "scdiff/common.hpp"
#include "scdiff/dataset.hpp"

namespace scdiff {

struct MixtureComponent {
  double weight = 1.0;
  Vector log_mean;  // per-gene location of the log-normal
  Vector log_sd;    // per-gene scale, >= 0 (0 collapses to exp(log_mean))
};

/// Describes a zero-inflated log-normal mixture: each cell picks one
/// component by weight, draws every gene log-normally, then zeroes each
/// gene independently with its dropout probability.
struct GeneratorSpec {
  Index n_genes = 0;
  Index n_cells = 0;
  std::vector<MixtureComponent> components;
  Vector dropout_prob;  // per gene, in [0, 1]
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidSpec
};

/// Analytic per-gene mean of the generated distribution:
/// sum_k w_k (1 - d_g) exp(mu_kg + sigma_kg^2 / 2).
Vector analytic_mean(const GeneratorSpec& spec);

/// Deterministic per seed; each cell uses its own derived stream, so any
/// cell's values are independent of n_cells and of generation order.
ExpressionMatrix generate(const GeneratorSpec& spec);

}  // namespace scdiff
