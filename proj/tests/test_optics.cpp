#include <doctest.h>

#include <cmath>
#include <random>

#include "psfinv/deconv.hpp"
#include "psfinv/errors.hpp"
#include "psfinv/optics.hpp"

using namespace psfinv;
using namespace psfinv::optics;

namespace {

double disk_inner(const Grid& a, const Grid& b, const Grid& mask) {
  return (a.array() * b.array() * mask.array()).sum();
}

Grid focus_phi(const OpticalParams& p, double focal) {
  const int w = p.design_index();
  return phase_to_height(fresnel_lens_phase(p, focal, w), p, w);
}

}  // namespace

TEST_CASE("noll indexing") {
  CHECK(noll_to_nm(1) == std::pair{0, 0});
  CHECK(noll_to_nm(2) == std::pair{1, 1});
  CHECK(noll_to_nm(3) == std::pair{1, -1});
  CHECK(noll_to_nm(4) == std::pair{2, 0});
  CHECK(noll_to_nm(11) == std::pair{4, 0});
  CHECK_THROWS_AS(noll_to_nm(0), InvalidParameter);
}

TEST_CASE("zernike basis") {
  const auto b = zernike_basis(15, 64);
  const Grid mask = aperture_mask(64);
  REQUIRE(b.grids.size() == 15);
  CHECK((b.grids[0] - mask).cwiseAbs().maxCoeff() == 0.0);
  for (const Grid& g : b.grids) CHECK((g.array() * (1.0 - mask.array())).abs().maxCoeff() == 0.0);
  for (int i = 0; i < 15; ++i)
    for (int j = i + 1; j < 15; ++j) {
      const double ni = std::sqrt(disk_inner(b.grids[i], b.grids[i], mask));
      const double nj = std::sqrt(disk_inner(b.grids[j], b.grids[j], mask));
      CHECK(std::abs(disk_inner(b.grids[i], b.grids[j], mask)) <= 0.02 * ni * nj);
    }
  // Defocus is radially symmetric about the grid center.
  const Grid& d = b.grids[3];
  CHECK((d - d.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  for (int i = 1; i < 64; ++i)
    for (int j = 1; j < 64; ++j) CHECK(d(i, j) == doctest::Approx(d(64 - i, 64 - j)).epsilon(1e-12));
}

TEST_CASE("heightmap is the coefficient sum") {
  const auto b = zernike_basis(6, 32);
  Vector a(6);
  a << 1e-7, -2e-7, 3e-8, 5e-7, 0.0, -1e-7;
  const Heightmap h = make_heightmap(a, b);
  Grid expect = Grid::Zero(32, 32);
  for (int l = 0; l < 6; ++l) expect += a(l) * b.grids[l];
  CHECK((h.phi - expect).cwiseAbs().maxCoeff() <= 1e-20);
}

TEST_CASE("flat surface renders a symmetric PSF") {
  const OpticalParams p = OpticalParams::desk_default(32);
  const Psf psf = render_psf(Grid::Zero(32, 32), p, 1);
  const Grid& g = psf.data();
  CHECK(g.sum() == doctest::Approx(1.0));
  for (int i = 1; i < 32; ++i)
    for (int j = 1; j < 32; ++j) CHECK(g(i, j) == doctest::Approx(g(32 - i, 32 - j)).epsilon(1e-9));
  CHECK((g - g.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("lens presets") {
  const OpticalParams p = OpticalParams::desk_default(64);
  CHECK(encircled_energy(render_psf(focus_phi(p, p.z), p, 1).data(), 1) >= 0.5);

  const double e_focus = encircled_energy(render_psf(focus_phi(p, p.z), p, 1).data(), 1);
  for (double f : {0.5 * p.z, 2.0 * p.z}) CHECK(encircled_energy(render_psf(focus_phi(p, f), p, 1).data(), 1) < e_focus);

  const Grid spiral = spiral_phase(1, 64);
  CHECK(spiral.minCoeff() >= 0.0);
  CHECK(spiral.maxCoeff() < 2 * kPi);
  // Walk a ring around the center and add the wrapped phase steps.
  double winding = 0;
  const int steps = 360;
  auto at = [&](int s) {
    const double t = 2 * kPi * s / steps;
    return spiral(static_cast<int>(std::lround(32 - 20 * std::sin(t))), static_cast<int>(std::lround(32 + 20 * std::cos(t))));
  };
  for (int s = 0; s < steps; ++s) winding += std::remainder(at(s + 1) - at(s), 2 * kPi);
  CHECK(std::abs(std::abs(winding) - 2 * kPi) < 1e-9);

  const int w = p.design_index();
  const Grid vortex = phase_to_height(wrap_phase(fresnel_lens_phase(p, p.z, w) + spiral), p, w);
  const Grid sp = render_psf(vortex, p, w).data();
  CHECK(sp(32, 32) < 0.01 * sp.maxCoeff());
}

TEST_CASE("propagation distance") {
  OpticalParams p = OpticalParams::desk_default(64);
  const Grid flat = Grid::Zero(64, 64);
  const double near = second_moment_radius(render_psf(flat, p, 1).data()) * sensor_pixel_size(p, 1);
  p.z *= 2;
  const double far = second_moment_radius(render_psf(flat, p, 1).data()) * sensor_pixel_size(p, 1);
  CHECK(far > near);
}

TEST_CASE("energy bookkeeping") {
  const OpticalParams p = OpticalParams::desk_default(64);
  const double ref = render_mass(Grid::Zero(64, 64), p, 1);
  CHECK(ref == doctest::Approx(aperture_mask(64).sum()).epsilon(1e-10));
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const Grid phi = phase_to_height(random_phase(64, s), p, 1);
    CHECK(std::abs(render_mass(phi, p, 1) - ref) <= 1e-8 * ref);
  }
}

TEST_CASE("sampling bound") {
  OpticalParams p = OpticalParams::desk_default(64);
  CHECK_NOTHROW(check_sampling(p, 0));
  p.pitch *= 1.2;
  try {
    render_psf(Grid::Zero(64, 64), p, 0);
    FAIL("expected AliasingError");
  } catch (const AliasingError& e) {
    CHECK(std::string(e.what()).find("lambda*z/side") != std::string::npos);
  }
}

TEST_CASE("sensor image") {
  const OpticalParams p = OpticalParams::desk_default(64);
  // Low-frequency scene: the diffraction-limited spot still spans about one pixel.
  Grid low(64, 64);
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) low(i, j) = 0.5 + 0.3 * std::sin(2 * kPi * 2 * j / 64) * std::cos(2 * kPi * i / 64);
  const std::vector<Grid> scene(3, low);

  // Per-wavelength focusing lens so every channel sees a near-impulse.
  const Grid phi = focus_phi(p, p.z);
  const auto out = sensor_image(scene, phi, p);
  REQUIRE(out.size() == 3);
  CHECK(psnr(out[1], scene[1]) >= 40.0);

  const std::vector<Grid> flat(3, Grid::Constant(64, 64, 0.4));
  for (const Grid& g : sensor_image(flat, phi, p)) CHECK((g.array() - 0.4).abs().maxCoeff() < 1e-12);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Grid> other(3, Grid(64, 64)), combo(3);
  for (Grid& g : other)
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = u(rng);
  for (int c = 0; c < 3; ++c) combo[c] = 2.0 * scene[c] - 0.5 * other[c];
  const auto a = sensor_image(scene, phi, p), b = sensor_image(other, phi, p), ab = sensor_image(combo, phi, p);
  for (int c = 0; c < 3; ++c) CHECK((ab[c] - (2.0 * a[c] - 0.5 * b[c])).cwiseAbs().maxCoeff() < 1e-10);

  CHECK_THROWS_AS(sensor_image({scene[0]}, phi, p), InvalidDimension);
}

TEST_CASE("coefficient sensitivities match central differences") {
  OpticalParams p = OpticalParams::desk_default(32);
  const auto basis = zernike_basis(6, 32);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 0.3);
  const double scale = p.wavelengths[1] / (2 * kPi * p.delta_eta);
  for (int inst = 0; inst < 5; ++inst) {
    Vector a(6);
    for (int l = 0; l < 6; ++l) a(l) = n(rng) * scale;
    const auto s = render_psf_sensitivity(a, basis, p, 1);
    CHECK((s.psf - render_psf(make_heightmap(a, basis), p, 1).data()).cwiseAbs().maxCoeff() < 1e-14);
    double largest = 0;
    for (const Grid& d : s.d_coeff) largest = std::max(largest, d.norm());
    for (int l = 0; l < 6; ++l) {
      const double h = 1e-5 * scale;
      Vector up = a, down = a;
      up(l) += h;
      down(l) -= h;
      const Grid fd = (render_psf(make_heightmap(up, basis), p, 1).data() - render_psf(make_heightmap(down, basis), p, 1).data()) / (2 * h);
      // Piston has a zero derivative; its finite difference is pure roundoff.
      CHECK((fd - s.d_coeff[l]).norm() <= 1e-3 * std::max(fd.norm(), 1e-6 * largest));
    }
  }
}

TEST_CASE("coefficient csv round trip") {
  const auto path = std::filesystem::temp_directory_path() / "psfinv_coeffs.csv";
  Vector a(4);
  a << 0.1, -2.5e-7, 3.0, 1.0 / 3.0;
  write_coeffs_csv(a, path);
  CHECK(read_coeffs_csv(path) == a);
}
