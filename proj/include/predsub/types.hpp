#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace predsub {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Node index type used throughout the sparse layouts.
using Index = std::int32_t;
using Offset = std::int64_t;

using Seed = std::uint64_t;

}  // namespace predsub
