#pragma once

#include <Eigen/Dense>

namespace scdiff {

// All numeric work is double precision. Matrices are row-major so that
// raw buffers serialize in row-major order and reshapes are cheap views.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

}  // namespace scdiff
