#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace otp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// d x n matrix, columns are samples, rows are features.
using PointCloud = Eigen::MatrixXd;

// n x n matrix of squared Euclidean distances, entry(i, j) = ||x_i - y_j||^2.
using CostMatrix = Eigen::MatrixXd;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline void require_same_shape(const PointCloud& x, const PointCloud& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw DimensionError("point clouds differ in shape: " +
                         std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + " vs " +
                         std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
  }
}

}  // namespace otp
