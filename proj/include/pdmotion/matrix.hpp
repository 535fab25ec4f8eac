#pragma once

#include <Eigen/Core>

namespace pdmotion {

/// Sample-major feature matrix: one row per window.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace pdmotion
