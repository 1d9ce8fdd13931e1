#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include "psfinv/grid.hpp"
#include "psfinv/psf.hpp"

namespace psfinv {

enum class Boundary { circular, zero_pad };

// Convolution y = x * kernel with the kernel centered at (rows/2, cols/2).
// Kernels are plain grids so 1D operators (one row) are expressible too.
struct ConvOperator {
  Grid kernel;
  Boundary boundary = Boundary::circular;
  int image_rows = 0;
  int image_cols = 0;

  Eigen::Index n() const { return static_cast<Eigen::Index>(image_rows) * image_cols; }
};

ConvOperator make_operator(const Psf& psf, int image_side, Boundary boundary = Boundary::circular);
ConvOperator make_operator(const Grid& kernel, int image_rows, int image_cols,
                           Boundary boundary = Boundary::circular);

// Circularly embed a kernel into an image-sized grid with its center moved to (0, 0).
Grid embed_kernel(const Grid& kernel, int rows, int cols);
// Inverse of embed_kernel restricted to the kernel footprint: gathers the
// entries of an image-sized grid at the positions the kernel occupies.
Grid gather_kernel(const Grid& image_sized, int kernel_rows, int kernel_cols);

// DFT of the embedded kernel.
ComplexGrid transfer_function(const Grid& kernel, int rows, int cols);

Grid convolve(const Grid& image, const ConvOperator& op);
// Adjoint of convolve (correlation with the kernel).
Grid correlate(const Grid& image, const ConvOperator& op);

inline constexpr Eigen::Index kDenseLimit = 4096;

// Matrix acting on row-major vec(x); rows index output pixels.
Eigen::MatrixXd build_dense_matrix(const ConvOperator& op);

struct SpectrumSummary {
  double sigma_max = 0;
  double sigma_min = 0;
  double kappa = 0;      // +inf when numerically singular
  double kappa_hth = 0;  // kappa squared
};

inline constexpr double kSingularTolerance = 1e-14;

SpectrumSummary summarize_spectrum(double sigma_max, double sigma_min);
SpectrumSummary condition_number_dense(const ConvOperator& op);
SpectrumSummary condition_number_circulant(const Psf& psf, int image_side);
SpectrumSummary condition_number_circulant(const Grid& kernel, int image_rows, int image_cols);

// {"sigma_max", "sigma_min", "kappa", "kappa_hth"}; infinities become "inf".
void to_json(nlohmann::json& j, const SpectrumSummary& s);

}  // namespace psfinv
