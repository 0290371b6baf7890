#include "scdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scdiff/errors.hpp"

namespace scdiff {

namespace {

void check_same_genes(const Matrix& a, const Matrix& b, const char* where) {
  if (a.cols() != b.cols())
    throw DimensionMismatch(std::string(where) + ": " +
                            std::to_string(a.cols()) + " vs " +
                            std::to_string(b.cols()) + " genes");
}

void check_nonempty(const Matrix& a, const Matrix& b, const char* where) {
  if (a.rows() == 0 || b.rows() == 0)
    throw EmptySample(std::string(where) + ": both sample sets must be nonempty");
}

}  // namespace

double wasserstein_1d_single(Vector a, Vector b) {
  if (a.size() == 0 || b.size() == 0)
    throw EmptySample("wasserstein_1d: empty sample vector");
  std::sort(a.data(), a.data() + a.size());
  std::sort(b.data(), b.data() + b.size());
  const Index na = a.size(), nb = b.size();
  if (na == nb) {
    double total = 0;
    for (Index i = 0; i < na; ++i) total += std::abs(a(i) - b(i));
    return total / static_cast<double>(na);
  }
  // Piecewise-constant inverse CDFs: walk the merged quantile breakpoints.
  double total = 0, q = 0;
  Index i = 0, j = 0;
  while (i < na && j < nb) {
    const double qa = static_cast<double>(i + 1) / static_cast<double>(na);
    const double qb = static_cast<double>(j + 1) / static_cast<double>(nb);
    const double q_next = std::min(qa, qb);
    total += (q_next - q) * std::abs(a(i) - b(j));
    q = q_next;
    if (qa <= q_next) ++i;
    if (qb <= q_next) ++j;
  }
  return total;
}

double wasserstein_1d(const Matrix& a, const Matrix& b) {
  check_same_genes(a, b, "wasserstein_1d");
  check_nonempty(a, b, "wasserstein_1d");
  if (a.cols() == 0) return 0.0;
  double total = 0;
  for (Index g = 0; g < a.cols(); ++g)
    total += wasserstein_1d_single(a.col(g), b.col(g));
  return total / static_cast<double>(a.cols());
}

double median_pairwise_distance(const Matrix& pooled) {
  const Index n = pooled.rows();
  if (n < 2) throw EmptySample("median distance needs at least two rows");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      d.push_back((pooled.row(i) - pooled.row(j)).norm());
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  if (m % 2 == 1) return d[m / 2];
  return 0.5 * (d[m / 2 - 1] + d[m / 2]);
}

namespace {

double mean_kernel(const Matrix& x, const Matrix& y, double inv_two_gamma_sq) {
  double total = 0;
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < y.rows(); ++j)
      total += std::exp(-(x.row(i) - y.row(j)).squaredNorm() * inv_two_gamma_sq);
  return total / static_cast<double>(x.rows() * y.rows());
}

}  // namespace

double mmd_rbf(const Matrix& a, const Matrix& b, double bandwidth) {
  check_same_genes(a, b, "mmd_rbf");
  check_nonempty(a, b, "mmd_rbf");
  if (!(bandwidth > 0.0))
    throw InvalidConfig("mmd bandwidth must be positive");
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  const double est = mean_kernel(a, a, inv) + mean_kernel(b, b, inv) -
                     2.0 * mean_kernel(a, b, inv);
  return std::sqrt(std::max(0.0, est));
}

double mmd_rbf(const Matrix& a, const Matrix& b) {
  check_same_genes(a, b, "mmd_rbf");
  check_nonempty(a, b, "mmd_rbf");
  Matrix pooled(a.rows() + b.rows(), a.cols());
  pooled.topRows(a.rows()) = a;
  pooled.bottomRows(b.rows()) = b;
  double gamma = median_pairwise_distance(pooled);
  if (gamma == 0.0) gamma = 1.0;  // all pooled points coincide
  return mmd_rbf(a, b, gamma);
}

double kl_histogram(const Matrix& a, const Matrix& b, int bins) {
  check_same_genes(a, b, "kl_histogram");
  check_nonempty(a, b, "kl_histogram");
  if (bins < 2) throw InvalidConfig("histogram needs at least 2 bins");
  if (a.cols() == 0) return 0.0;
  const Index na = a.rows(), nb = b.rows();
  std::vector<double> ca(static_cast<std::size_t>(bins));
  std::vector<double> cb(static_cast<std::size_t>(bins));
  double total = 0;
  for (Index g = 0; g < a.cols(); ++g) {
    const double lo = std::min(a.col(g).minCoeff(), b.col(g).minCoeff());
    const double hi = std::max(a.col(g).maxCoeff(), b.col(g).maxCoeff());
    if (lo == hi) continue;  // single-point range carries no information
    const double width = (hi - lo) / static_cast<double>(bins);
    auto bin_of = [&](double v) {
      auto k = static_cast<Index>((v - lo) / width);
      if (k < 0) k = 0;
      if (k >= bins) k = bins - 1;  // v == hi lands in the last bin
      return static_cast<std::size_t>(k);
    };
    std::fill(ca.begin(), ca.end(), 0.0);
    std::fill(cb.begin(), cb.end(), 0.0);
    for (Index i = 0; i < na; ++i) ca[bin_of(a(i, g))] += 1.0;
    for (Index i = 0; i < nb; ++i) cb[bin_of(b(i, g))] += 1.0;
    const double denom_a = static_cast<double>(na + bins);
    const double denom_b = static_cast<double>(nb + bins);
    double kl = 0;
    for (int k = 0; k < bins; ++k) {
      const double p = (ca[static_cast<std::size_t>(k)] + 1.0) / denom_a;
      const double q = (cb[static_cast<std::size_t>(k)] + 1.0) / denom_b;
      kl += p * std::log(p / q);
    }
    total += kl;
  }
  return total / static_cast<double>(a.cols());
}

CvZeroProp cv_and_zero_prop(const Matrix& m) {
  CvZeroProp out;
  out.cv.resize(m.cols());
  out.zero_prop.resize(m.cols());
  for (Index g = 0; g < m.cols(); ++g) {
    const double mean = m.col(g).mean();
    if (mean == 0.0) {
      out.cv(g) = std::numeric_limits<double>::quiet_NaN();
    } else {
      const double var = (m.col(g).array() - mean).square().mean();
      out.cv(g) = std::sqrt(var) / mean;
    }
    out.zero_prop(g) =
        (m.col(g).array() == 0.0).cast<double>().mean();
  }
  return out;
}

PcaProjection pca_project(const Matrix& real, const Matrix& synth, Index dims) {
  check_same_genes(real, synth, "pca_project");
  const Index rows = real.rows() + synth.rows();
  const Index d = real.cols();
  if (rows < dims || d < dims)
    throw InvalidConfig("pca needs at least `dims` pooled rows and genes");

  Matrix pooled(rows, d);
  pooled.topRows(real.rows()) = real;
  pooled.bottomRows(synth.rows()) = synth;
  RowVector center = pooled.colwise().mean();
  Matrix xc = pooled.rowwise() - center;

  // Orthogonal power iteration on X^T X without forming the covariance.
  // Deterministic start: unit axes e_0, e_1, ... perturbed slightly so a
  // start vector orthogonal to the leading axis cannot stall.
  Matrix v = Matrix::Zero(d, dims);
  for (Index k = 0; k < dims; ++k) {
    v(k % d, k) = 1.0;
    v((k + 1) % d, k) += 1e-3;
  }
  auto orthonormalize = [&](Matrix& m) {
    for (Index k = 0; k < m.cols(); ++k) {
      for (Index p = 0; p < k; ++p)
        m.col(k) -= m.col(p) * (m.col(p).dot(m.col(k)));
      const double norm = m.col(k).norm();
      if (norm == 0.0)
        throw ConvergenceFailure("pca: degenerate direction during iteration");
      m.col(k) /= norm;
    }
  };
  orthonormalize(v);
  const int max_iters = 1000;
  const double tol = 1e-9;
  bool converged = false;
  for (int it = 0; it < max_iters; ++it) {
    Matrix next = xc.transpose() * (xc * v);
    orthonormalize(next);
    const double delta = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (delta < tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw ConvergenceFailure("pca power iteration did not reach tolerance");

  for (Index k = 0; k < dims; ++k) {
    Index arg = 0;
    v.col(k).cwiseAbs().maxCoeff(&arg);
    if (v(arg, k) < 0.0) v.col(k) = -v.col(k);
  }

  PcaProjection out;
  out.axes = v;
  Matrix centered_real = real.rowwise() - center;
  Matrix centered_synth = synth.rowwise() - center;
  out.real_coords = centered_real * v;
  out.synth_coords = centered_synth * v;
  return out;
}

MetricsReport compute_metrics(const Matrix& real, const Matrix& synth,
                              int bins) {
  check_same_genes(real, synth, "compute_metrics");
  check_nonempty(real, synth, "compute_metrics");
  MetricsReport r;
  r.n_real = real.rows();
  r.n_synth = synth.rows();
  r.histogram_bins = bins;
  Matrix pooled(real.rows() + synth.rows(), real.cols());
  pooled.topRows(real.rows()) = real;
  pooled.bottomRows(synth.rows()) = synth;
  r.kernel_bandwidth = median_pairwise_distance(pooled);
  if (r.kernel_bandwidth == 0.0) r.kernel_bandwidth = 1.0;
  r.mmd = mmd_rbf(real, synth, r.kernel_bandwidth);
  r.wasserstein = wasserstein_1d(real, synth);
  r.kl = kl_histogram(real, synth, bins);
  r.real_stats = cv_and_zero_prop(real);
  r.synth_stats = cv_and_zero_prop(synth);
  return r;
}

}  // namespace scdiff
