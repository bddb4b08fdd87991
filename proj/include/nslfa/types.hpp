#pragma once

#include <Eigen/Core>

namespace nslfa {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = Mat<double>;
using Vector = Vec<double>;
using IntMatrix = Mat<int>;
using Index = Eigen::Index;

}  // namespace nslfa
