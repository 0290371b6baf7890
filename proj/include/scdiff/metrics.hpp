#pragma once

#include <vector>

#include "scdiff/common.hpp"

namespace scdiff {

/// W1 between two 1-D empirical distributions: with equal sizes the mean
/// absolute difference of sorted samples; with unequal sizes the exact
/// piecewise integral of |F_a^{-1}(q) - F_b^{-1}(q)| over q in (0, 1).
double wasserstein_1d_single(Vector a, Vector b);

/// Mean over genes of the per-gene 1-D W1 (columns paired by index).
double wasserstein_1d(const Matrix& a, const Matrix& b);

/// Median Euclidean distance over all row pairs of one pooled matrix
/// (average of the two middle order statistics for even pair counts).
double median_pairwise_distance(const Matrix& pooled);

/// Biased (V-statistic) MMD with Gaussian kernel
/// exp(-|x-y|^2 / (2 gamma^2)); returns sqrt of the estimate floored at 0.
/// gamma defaults to the median heuristic over the pooled rows (falling
/// back to 1 when every pooled point coincides).
double mmd_rbf(const Matrix& a, const Matrix& b, double bandwidth);
double mmd_rbf(const Matrix& a, const Matrix& b);

/// Mean over genes of discrete KL(a-hist || b-hist) on shared equal-width
/// bins spanning the pooled min/max, with add-one smoothing, natural log.
/// A gene whose pooled range is a single point contributes 0.
double kl_histogram(const Matrix& a, const Matrix& b, int bins = 50);

struct CvZeroProp {
  Vector cv;         // NaN marks genes whose mean is zero (cv undefined)
  Vector zero_prop;  // fraction of exact zeros per gene
};
CvZeroProp cv_and_zero_prop(const Matrix& m);

struct PcaProjection {
  Matrix real_coords;   // n_real x dims
  Matrix synth_coords;  // n_synth x dims
  Matrix axes;          // genes x dims, unit columns, sign-fixed
};

/// Projects both sets onto the top principal axes of the pooled, centered
/// data. Axes come from orthogonal power iteration (tolerance 1e-9, at
/// most 1000 sweeps); each axis is signed so its largest-magnitude
/// loading is positive.
PcaProjection pca_project(const Matrix& real, const Matrix& synth,
                          Index dims = 2);

struct MetricsReport {
  double kl = 0;
  double wasserstein = 0;
  double mmd = 0;
  CvZeroProp real_stats, synth_stats;
  Index n_real = 0, n_synth = 0;
  double kernel_bandwidth = 0;
  int histogram_bins = 0;
};

MetricsReport compute_metrics(const Matrix& real, const Matrix& synth,
                              int bins = 50);

}  // namespace scdiff
