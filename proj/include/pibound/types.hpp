#pragma once

#include <Eigen/Dense>

namespace pibound {

/// Dense n x m matrices (cost, penalty, value) are stored row-major so that an
/// arc index a = i * m + j addresses entry (i, j) directly.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace pibound
