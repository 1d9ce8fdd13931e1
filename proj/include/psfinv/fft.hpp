#pragma once

#include "psfinv/grid.hpp"

namespace psfinv::fft {

// Unnormalized forward 2D DFT.
ComplexGrid forward(const ComplexGrid& x);
ComplexGrid forward(const Grid& x);

// Inverse 2D DFT scaled by 1/(rows*cols), so inverse(forward(x)) == x.
ComplexGrid inverse(const ComplexGrid& x);
Grid inverse_real(const ComplexGrid& x);

// Swap quadrants so the zero-frequency sample lands at (rows/2, cols/2).
template <typename M>
M shift(const M& x) {
  const Eigen::Index r = x.rows(), c = x.cols();
  M out(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) out((i + r / 2) % r, (j + c / 2) % c) = x(i, j);
  return out;
}

template <typename M>
M ishift(const M& x) {
  const Eigen::Index r = x.rows(), c = x.cols();
  M out(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) out(i, j) = x((i + r / 2) % r, (j + c / 2) % c);
  return out;
}

}  // namespace psfinv::fft
