#include <doctest.h>

#include <random>

#include "psfinv/conv.hpp"
#include "psfinv/errors.hpp"
#include "psfinv/fft.hpp"

using namespace psfinv;

namespace {

Grid random_grid(int r, int c, std::mt19937_64& rng, double lo = 0.0) {
  std::uniform_real_distribution<double> u(lo, 1.0);
  Grid g(r, c);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = u(rng);
  return g;
}

}  // namespace

TEST_CASE("convolve identities") {
  std::mt19937_64 rng(1);
  const Grid x = random_grid(8, 8, rng);
  CHECK((convolve(x, make_operator(impulse_psf(3), 8)) - x).cwiseAbs().maxCoeff() < 1e-15);
  const Grid c = Grid::Constant(8, 8, 0.37);
  CHECK((convolve(c, make_operator(gaussian_psf(5, 1.2), 8)) - c).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(convolve(Grid::Zero(7, 7), make_operator(impulse_psf(3), 8)), InvalidDimension);
}

TEST_CASE("FFT convolution equals the dense matrix product") {
  std::mt19937_64 rng(2);
  for (int side = 4; side <= 8; ++side)
    for (Boundary b : {Boundary::circular, Boundary::zero_pad}) {
      const Psf h(random_grid(3, 3, rng), "r");
      const auto op = make_operator(h, side, b);
      const Eigen::MatrixXd H = build_dense_matrix(op);
      const Grid x = random_grid(side, side, rng);
      const Vector hx = H * flatten(x);
      CHECK((hx - flatten(convolve(x, op))).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("dense matrix structure") {
  const Eigen::MatrixXd I = build_dense_matrix(make_operator(impulse_psf(3), 6));
  CHECK(I.isIdentity(0.0));
  const Eigen::MatrixXd H = build_dense_matrix(make_operator(gaussian_psf(5, 1.0), 8));
  CHECK((H.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(build_dense_matrix(make_operator(impulse_psf(3), 65)), SizeLimitError);
}

TEST_CASE("condition numbers") {
  const auto imp = condition_number_dense(make_operator(impulse_psf(5), 8));
  CHECK(imp.kappa == 1.0);
  CHECK(imp.kappa_hth == 1.0);
  CHECK(condition_number_circulant(impulse_psf(5), 8).kappa == 1.0);

  Grid k1(1, 2);
  k1 << 0.75, 0.25;
  // 2-point DFT magnitudes are 1.0 and 0.5.
  CHECK(condition_number_dense(make_operator(k1, 1, 2)).kappa == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(condition_number_circulant(k1, 1, 2).kappa == doctest::Approx(2.0).epsilon(1e-12));
  Grid k2(1, 2);
  k2 << 0.5, 0.5;
  CHECK(condition_number_dense(make_operator(k2, 1, 2)).kappa == kInf);
  CHECK(condition_number_circulant(k2, 1, 2).kappa == kInf);

  CHECK(condition_number_circulant(gaussian_psf(16, 4.0), 16).kappa >
        condition_number_circulant(gaussian_psf(16, 0.5), 16).kappa);
}

TEST_CASE("circulant oracle agrees with dense SVD") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const int ks = 1 + 2 * (t % 4);
    const Psf h(random_grid(ks, ks, rng, 0.05), "r");
    const auto d = condition_number_dense(make_operator(h, 8));
    const auto c = condition_number_circulant(h, 8);
    CHECK(std::abs(d.kappa - c.kappa) / c.kappa < 1e-8);
    CHECK(std::abs(d.sigma_max - c.sigma_max) / c.sigma_max < 1e-8);
  }
}

TEST_CASE("linearity, round trip and adjoint") {
  std::mt19937_64 rng(4);
  const Psf h(random_grid(5, 5, rng), "r");
  for (Boundary b : {Boundary::circular, Boundary::zero_pad}) {
    const auto op = make_operator(h, 12, b);
    const Grid x = random_grid(12, 12, rng, -1.0), z = random_grid(12, 12, rng, -1.0);
    const Grid lhs = convolve(2.5 * x - 0.75 * z, op);
    const Grid rhs = 2.5 * convolve(x, op) - 0.75 * convolve(z, op);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
    const double a = convolve(x, op).cwiseProduct(z).sum();
    const double c = x.cwiseProduct(correlate(z, op)).sum();
    CHECK(std::abs(a - c) < 1e-10);
  }
  const Grid x = random_grid(10, 6, rng, -1.0);
  CHECK((fft::inverse_real(fft::forward(x)) - x).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("spectrum json encodes infinity as a string") {
  nlohmann::json j = summarize_spectrum(1.0, 0.0);
  CHECK(j["kappa"] == "inf");
  CHECK(j["kappa_hth"] == "inf");
  nlohmann::json k = summarize_spectrum(2.0, 1.0);
  CHECK(k["kappa"] == 2.0);
  CHECK(k["kappa_hth"] == 4.0);
}
