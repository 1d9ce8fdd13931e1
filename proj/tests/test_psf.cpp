#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "psfinv/errors.hpp"
#include "psfinv/psf.hpp"

using namespace psfinv;

TEST_CASE("impulse_psf") {
  CHECK(impulse_psf(1).data()(0, 0) == 1.0);
  const Psf p = impulse_psf(3);
  CHECK(p(1, 1) == 1.0);
  CHECK(p.data().sum() == 1.0);
  CHECK_THROWS_AS(impulse_psf(0), InvalidDimension);
}

TEST_CASE("gaussian_psf center value and limits") {
  // 1 center, 4 edges at exp(-1/2), 4 corners at exp(-1).
  const double expected = 1.0 / (1.0 + 4.0 * std::exp(-0.5) + 4.0 * std::exp(-1.0));
  CHECK(gaussian_psf(3, 1.0)(1, 1) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(gaussian_psf(3, 1.0)(1, 1) - 0.2042) < 1e-3);
  CHECK((gaussian_psf(5, 1e-3).data() - impulse_psf(5).data()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK_THROWS_AS(gaussian_psf(5, 0.0), InvalidParameter);
  CHECK_THROWS_AS(gaussian_psf(5, -1.0), InvalidParameter);
}

TEST_CASE("gaussian entropy grows with sigma and the grid is symmetric") {
  CHECK(entropy(gaussian_psf(15, 0.7)) < entropy(gaussian_psf(15, 2.0)));
  const Psf g = gaussian_psf(9, 1.7);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) {
      CHECK(g(i, j) == doctest::Approx(g(j, i)).epsilon(1e-15));
      CHECK(g(i, j) == doctest::Approx(g(8 - i, j)).epsilon(1e-15));
    }
}

TEST_CASE("motion_blur_psf") {
  CHECK(motion_blur_psf(7, 1, 33.0).data() == impulse_psf(7).data());
  const Psf m = motion_blur_psf(5, 5, 0.0);
  for (int j = 0; j < 5; ++j) CHECK(m(2, j) == doctest::Approx(0.2));
  CHECK(m.data().row(2).sum() == doctest::Approx(1.0));
  CHECK(motion_blur_psf(9, 5, 90.0).data() == motion_blur_psf(9, 5, 0.0).data().transpose());
  CHECK_THROWS_AS(motion_blur_psf(5, 6, 0.0), InvalidParameter);
}

TEST_CASE("diffuser_psf") {
  const Psf a = diffuser_psf(32, 4), b = diffuser_psf(32, 4);
  CHECK(a.data() == b.data());
  CHECK(std::abs(a.data().sum() - 1.0) < 1e-12);
  CHECK(entropy(a) > entropy(impulse_psf(32)));
  CHECK(diffuser_psf(32, 5).data() != a.data());
  CHECK_THROWS_AS(diffuser_psf(2, 1), InvalidDimension);
}

TEST_CASE("add_noise") {
  const Psf g = gaussian_psf(16, 2.0);
  CHECK(add_noise(g, NoiseSpec::clean()).data() == g.data());
  const Psf a = add_noise(impulse_psf(16), {25.0, 7}), b = add_noise(impulse_psf(16), {25.0, 7});
  CHECK(a.data() == b.data());
  CHECK(std::abs(a.data().sum() - 1.0) < 1e-12);
  CHECK((a.data().array() >= 0).all());
  CHECK_THROWS_AS(add_noise(g, {std::nan(""), 1}), InvalidParameter);
  CHECK_THROWS_AS(add_noise(g, {-INFINITY, 1}), InvalidParameter);
}

TEST_CASE("realized noise power matches the requested SNR") {
  const Psf h = gaussian_psf(64, 3.0);
  for (double snr : {15.0, 25.0, 35.0}) {
    const Grid eps = draw_noise(h, {snr, 11});
    const double realized = 10.0 * std::log10(h.data().squaredNorm() / eps.squaredNorm());
    CHECK(std::abs(realized - snr) < 0.5);
  }
}

TEST_CASE("psf text and raster round trips") {
  const auto dir = std::filesystem::temp_directory_path() / "psfinv_test_psf";
  std::filesystem::create_directories(dir);
  const Psf g = gaussian_psf(7, 1.3);
  write_psf_text(g, dir / "g.txt");
  CHECK((read_psf_text(dir / "g.txt").data() - g.data()).cwiseAbs().maxCoeff() < 1e-16);
  write_psf_raster(g, dir / "g.psf1");
  CHECK(std::filesystem::file_size(dir / "g.psf1") == 16 + 49 * 4);
  CHECK((read_psf_raster(dir / "g.psf1").data() - g.data()).cwiseAbs().maxCoeff() < 1e-7);
  CHECK(crop_center(gaussian_psf(9, 1.0), 3).data().sum() == doctest::Approx(1.0));
}
