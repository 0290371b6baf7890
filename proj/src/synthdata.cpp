#include "scdiff/synthdata.hpp"

#include <cmath>
#include <string>

#include "scdiff/errors.hpp"
#include "scdiff/rng.hpp"

namespace scdiff {

void GeneratorSpec::validate() const {
  if (n_genes <= 0 || n_cells <= 0)
    throw InvalidSpec("generator needs positive n_genes and n_cells");
  if (components.empty())
    throw InvalidSpec("generator needs at least one mixture component");
  double weight_sum = 0;
  for (std::size_t k = 0; k < components.size(); ++k) {
    const MixtureComponent& c = components[k];
    if (!(c.weight > 0.0) || !std::isfinite(c.weight))
      throw InvalidSpec("component " + std::to_string(k) +
                        ": weight must be positive and finite");
    weight_sum += c.weight;
    if (c.log_mean.size() != n_genes || c.log_sd.size() != n_genes)
      throw InvalidSpec("component " + std::to_string(k) +
                        ": per-gene vectors must have length n_genes");
    if (!c.log_mean.allFinite() || !c.log_sd.allFinite())
      throw InvalidSpec("component " + std::to_string(k) +
                        ": non-finite parameter");
    if ((c.log_sd.array() < 0.0).any())
      throw InvalidSpec("component " + std::to_string(k) +
                        ": log_sd must be nonnegative");
  }
  if (std::abs(weight_sum - 1.0) > 1e-9)
    throw InvalidSpec("component weights must sum to 1, got " +
                      std::to_string(weight_sum));
  if (dropout_prob.size() != n_genes)
    throw InvalidSpec("dropout_prob must have length n_genes");
  if (!dropout_prob.allFinite() || (dropout_prob.array() < 0.0).any() ||
      (dropout_prob.array() > 1.0).any())
    throw InvalidSpec("dropout_prob entries must lie in [0, 1]");
}

Vector analytic_mean(const GeneratorSpec& spec) {
  spec.validate();
  Vector mean = Vector::Zero(spec.n_genes);
  for (const MixtureComponent& c : spec.components)
    mean.array() += c.weight * (c.log_mean.array() +
                                0.5 * c.log_sd.array().square())
                                   .exp();
  mean.array() *= 1.0 - spec.dropout_prob.array();
  return mean;
}

ExpressionMatrix generate(const GeneratorSpec& spec) {
  spec.validate();
  Vector cum(static_cast<Index>(spec.components.size()));
  double running = 0;
  for (Index k = 0; k < cum.size(); ++k) {
    running += spec.components[static_cast<std::size_t>(k)].weight;
    cum(k) = running;
  }

  ExpressionMatrix out;
  out.values.resize(spec.n_cells, spec.n_genes);
  out.gene_names.reserve(static_cast<std::size_t>(spec.n_genes));
  for (Index g = 0; g < spec.n_genes; ++g)
    out.gene_names.push_back("gene_" + std::to_string(g));
  out.cell_ids.reserve(static_cast<std::size_t>(spec.n_cells));

  for (Index i = 0; i < spec.n_cells; ++i) {
    out.cell_ids.push_back("cell_" + std::to_string(i));
    Rng rng = Rng::split(spec.seed, static_cast<std::uint64_t>(i));
    const double u = rng.uniform();
    Index pick = cum.size() - 1;
    for (Index k = 0; k < cum.size(); ++k) {
      if (u < cum(k)) {
        pick = k;
        break;
      }
    }
    const MixtureComponent& c = spec.components[static_cast<std::size_t>(pick)];
    for (Index g = 0; g < spec.n_genes; ++g) {
      const double value = std::exp(c.log_mean(g) + c.log_sd(g) * rng.gaussian());
      const bool dropped = rng.uniform() < spec.dropout_prob(g);
      out.values(i, g) = dropped ? 0.0 : value;
    }
  }
  return out;
}

}  // namespace scdiff
