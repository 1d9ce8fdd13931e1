#pragma once

#include <Eigen/Core>
#include <complex>
#include <limits>

namespace psfinv {

// Row-major so that data() matches the flattening used for the metric network
// and the raster file formats.
using Grid = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexGrid = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.141592653589793238462643383279502884;

inline Vector flatten(const Grid& g) { return Eigen::Map<const Vector>(g.data(), g.size()); }

inline Grid unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Grid>(v.data(), rows, cols);
}

}  // namespace psfinv
