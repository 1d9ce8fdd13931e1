#include "psfinv/conv.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "psfinv/errors.hpp"
#include "psfinv/fft.hpp"

namespace psfinv {

ConvOperator make_operator(const Grid& kernel, int image_rows, int image_cols, Boundary boundary) {
  if (kernel.size() == 0) throw InvalidDimension("conv: empty kernel");
  if (image_rows < kernel.rows() || image_cols < kernel.cols())
    throw InvalidDimension("conv: image must be at least as large as the kernel");
  return ConvOperator{kernel, boundary, image_rows, image_cols};
}

ConvOperator make_operator(const Psf& psf, int image_side, Boundary boundary) {
  return make_operator(psf.data(), image_side, image_side, boundary);
}

Grid embed_kernel(const Grid& kernel, int rows, int cols) {
  Grid out = Grid::Zero(rows, cols);
  const Eigen::Index cr = kernel.rows() / 2, cc = kernel.cols() / 2;
  for (Eigen::Index i = 0; i < kernel.rows(); ++i)
    for (Eigen::Index j = 0; j < kernel.cols(); ++j) {
      const Eigen::Index r = ((i - cr) % rows + rows) % rows;
      const Eigen::Index c = ((j - cc) % cols + cols) % cols;
      out(r, c) += kernel(i, j);
    }
  return out;
}

Grid gather_kernel(const Grid& image_sized, int kernel_rows, int kernel_cols) {
  const Eigen::Index rows = image_sized.rows(), cols = image_sized.cols();
  Grid out(kernel_rows, kernel_cols);
  const Eigen::Index cr = kernel_rows / 2, cc = kernel_cols / 2;
  for (Eigen::Index i = 0; i < kernel_rows; ++i)
    for (Eigen::Index j = 0; j < kernel_cols; ++j)
      out(i, j) = image_sized(((i - cr) % rows + rows) % rows, ((j - cc) % cols + cols) % cols);
  return out;
}

ComplexGrid transfer_function(const Grid& kernel, int rows, int cols) {
  return fft::forward(embed_kernel(kernel, rows, cols));
}

namespace {

void check_image(const Grid& image, const ConvOperator& op) {
  if (image.rows() != op.image_rows || image.cols() != op.image_cols)
    throw InvalidDimension("conv: image shape does not match operator");
}

// Direct "same" convolution with zeros outside the image; adjoint flips the offsets.
Grid zero_pad_apply(const Grid& x, const Grid& k, bool adjoint) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  const Eigen::Index cr = k.rows() / 2, cc = k.cols() / 2;
  const int sgn = adjoint ? -1 : 1;
  Grid y = Grid::Zero(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      double acc = 0;
      for (Eigen::Index i = 0; i < k.rows(); ++i) {
        const Eigen::Index sr = r - sgn * (i - cr);
        if (sr < 0 || sr >= rows) continue;
        for (Eigen::Index j = 0; j < k.cols(); ++j) {
          const Eigen::Index sc = c - sgn * (j - cc);
          if (sc < 0 || sc >= cols) continue;
          acc += k(i, j) * x(sr, sc);
        }
      }
      y(r, c) = acc;
    }
  return y;
}

}  // namespace

Grid convolve(const Grid& image, const ConvOperator& op) {
  check_image(image, op);
  if (op.boundary == Boundary::zero_pad) return zero_pad_apply(image, op.kernel, false);
  const ComplexGrid h = transfer_function(op.kernel, op.image_rows, op.image_cols);
  return fft::inverse_real(fft::forward(image).cwiseProduct(h));
}

Grid correlate(const Grid& image, const ConvOperator& op) {
  check_image(image, op);
  if (op.boundary == Boundary::zero_pad) return zero_pad_apply(image, op.kernel, true);
  const ComplexGrid h = transfer_function(op.kernel, op.image_rows, op.image_cols);
  return fft::inverse_real(fft::forward(image).cwiseProduct(h.conjugate()));
}

Eigen::MatrixXd build_dense_matrix(const ConvOperator& op) {
  const Eigen::Index n = op.n();
  if (n > kDenseLimit)
    throw SizeLimitError("dense matrix with n = " + std::to_string(n) + " exceeds the limit of " +
                         std::to_string(kDenseLimit) + " pixels; use condition_number_circulant instead");
  const Eigen::Index rows = op.image_rows, cols = op.image_cols;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  if (op.boundary == Boundary::circular) {
    const Grid hp = embed_kernel(op.kernel, op.image_rows, op.image_cols);
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = 0; q < n; ++q) {
        const Eigen::Index dr = ((p / cols - q / cols) % rows + rows) % rows;
        const Eigen::Index dc = ((p % cols - q % cols) % cols + cols) % cols;
        h(p, q) = hp(dr, dc);
      }
    return h;
  }
  const Eigen::Index cr = op.kernel.rows() / 2, cc = op.kernel.cols() / 2;
  for (Eigen::Index p = 0; p < n; ++p)
    for (Eigen::Index i = 0; i < op.kernel.rows(); ++i)
      for (Eigen::Index j = 0; j < op.kernel.cols(); ++j) {
        const Eigen::Index sr = p / cols - (i - cr), sc = p % cols - (j - cc);
        if (sr < 0 || sr >= rows || sc < 0 || sc >= cols) continue;
        h(p, sr * cols + sc) += op.kernel(i, j);
      }
  return h;
}

SpectrumSummary summarize_spectrum(double sigma_max, double sigma_min) {
  SpectrumSummary s{sigma_max, sigma_min, kInf, kInf};
  if (sigma_min >= kSingularTolerance * sigma_max && sigma_min > 0) {
    s.kappa = sigma_max / sigma_min;
    s.kappa_hth = s.kappa * s.kappa;
  }
  return s;
}

SpectrumSummary condition_number_dense(const ConvOperator& op) {
  const Eigen::MatrixXd h = build_dense_matrix(op);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(h);
  const auto& sv = svd.singularValues();
  return summarize_spectrum(sv(0), sv(sv.size() - 1));
}

SpectrumSummary condition_number_circulant(const Grid& kernel, int image_rows, int image_cols) {
  if (image_rows < kernel.rows() || image_cols < kernel.cols())
    throw InvalidDimension("conv: image must be at least as large as the kernel");
  const Grid mag = transfer_function(kernel, image_rows, image_cols).cwiseAbs();
  return summarize_spectrum(mag.maxCoeff(), mag.minCoeff());
}

SpectrumSummary condition_number_circulant(const Psf& psf, int image_side) {
  return condition_number_circulant(psf.data(), image_side, image_side);
}

void to_json(nlohmann::json& j, const SpectrumSummary& s) {
  auto encode = [](double v) -> nlohmann::json {
    if (std::isinf(v)) return "inf";
    return v;
  };
  j = nlohmann::json{{"sigma_max", encode(s.sigma_max)},
                     {"sigma_min", encode(s.sigma_min)},
                     {"kappa", encode(s.kappa)},
                     {"kappa_hth", encode(s.kappa_hth)}};
}

}  // namespace psfinv
