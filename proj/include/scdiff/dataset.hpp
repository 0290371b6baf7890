#pragma once

#include <string>
#include <vector>

#include "scdiff/common.hpp"

namespace scdiff {

/// Cells-by-genes expression table. `cell_ids` is either empty or has one
/// entry per row; `gene_names` always has one entry per column.
struct ExpressionMatrix {
  Matrix values;  // rows = cells, cols = genes
  std::vector<std::string> gene_names;
  std::vector<std::string> cell_ids;

  Index cells() const { return values.rows(); }
  Index genes() const { return values.cols(); }
};

/// Record of the screening + negation applied before training, kept so that
/// sampling-time outputs can be mapped back to gene names and so the exact
/// transform travels with the model checkpoint.
struct PreprocessSpec {
  int top_k = 2000;
  double negation = -10.0;
  std::vector<std::string> selected_genes;      // rank order (cv descending)
  std::vector<Index> selected_indices;          // into the original matrix
  std::vector<std::string> skipped_zero_mean;   // unrankable genes

  bool operator==(const PreprocessSpec&) const = default;
};

/// Population coefficient of variation sd/mean of one gene across cells.
/// Throws ZeroMeanGene when the mean is zero (all-zero gene in raw data).
double coefficient_of_variation(const Vector& gene_column);

struct SelectionResult {
  PreprocessSpec spec;
  ExpressionMatrix reduced;  // columns reordered by rank
};

/// Ranks genes by cv (ties broken by name ascending) and keeps the top_k
/// most variable. Genes whose cv is undefined go to the skip list.
SelectionResult select_hypervariable(const ExpressionMatrix& m, int top_k,
                                     double negation = -10.0);

/// Replaces exact zeros with the (negative) sentinel n. Input must be a raw
/// non-negative matrix.
Matrix zero_negate(const Matrix& values, double n);

/// Clamps negative entries of generated output up to exactly 0.0.
Matrix truncate_negatives(const Matrix& values);

/// Applies the recorded selection + negation of `spec` to a raw matrix.
ExpressionMatrix apply_preprocess(const ExpressionMatrix& raw,
                                  const PreprocessSpec& spec);

/// CSV with header `cell_id,<gene>,...`; one row per cell.
ExpressionMatrix load_csv(const std::string& path,
                          bool require_nonnegative = false);
void save_csv(const ExpressionMatrix& m, const std::string& path);

}  // namespace scdiff
