#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "psfinv/grid.hpp"
#include "psfinv/psf.hpp"

namespace psfinv::optics {

struct OpticalParams {
  std::vector<double> wavelengths;  // meters
  double z = 0.05;                  // propagation distance, meters
  double delta_eta = 0.5;           // refractive index contrast of the element
  int aperture_side = 64;           // samples
  double pitch = 0.0;               // meters per sample
  Eigen::MatrixXd sensitivity;      // channels x wavelengths, rows sum to 1

  // 460/550/640 nm, z = 50 mm, identity sensitivity, pitch at 90% of the
  // quadratic-phase sampling bound of the shortest wavelength.
  static OpticalParams desk_default(int aperture_side = 64);

  int channels() const { return static_cast<int>(sensitivity.rows()); }
  int design_index() const { return static_cast<int>(wavelengths.size()) / 2; }
  void validate() const;
};

// Throws AliasingError when pitch^2 > lambda*z/side for the given wavelength.
void check_sampling(const OpticalParams& p, int wavelength_index);

// Pixel footprint of the rendered PSF grid on the sensor (lambda*z/(N*pitch)).
double sensor_pixel_size(const OpticalParams& p, int wavelength_index);

// Noll index (1-based) to radial order n and azimuthal frequency m.
std::pair<int, int> noll_to_nm(int j);

// Binary circular aperture: sample (i, j) is inside when its distance from
// (side/2, side/2) is at most side/2 - 1 pixels.
Grid aperture_mask(int side);

struct ZernikeBasis {
  int count = 0;
  int side = 0;
  std::vector<Grid> grids;  // Noll order, zero outside the disk
};

ZernikeBasis zernike_basis(int count, int side);

struct Heightmap {
  Vector coeffs;
  Grid phi;  // surface height in meters
};

Heightmap make_heightmap(const Vector& coeffs, const ZernikeBasis& basis);
// Heightmap realizing a lens phase (radians) at the given wavelength.
Grid phase_to_height(const Grid& phase, const OpticalParams& p, int wavelength_index);

// Render the intensity PSF of a surface at one wavelength.
Psf render_psf(const Grid& phi, const OpticalParams& p, int wavelength_index, std::string id = "rendered");
Psf render_psf(const Heightmap& h, const OpticalParams& p, int wavelength_index);

// Total intensity before unit-mass normalization.
double render_mass(const Grid& phi, const OpticalParams& p, int wavelength_index);

// PSF together with dh/da_l for every Zernike coefficient (forward-mode).
struct PsfSensitivity {
  Grid psf;
  std::vector<Grid> d_coeff;
};

PsfSensitivity render_psf_sensitivity(const Vector& coeffs, const ZernikeBasis& basis,
                                      const OpticalParams& p, int wavelength_index);

// Phase presets in radians, wrapped to [0, 2*pi).
Grid fresnel_lens_phase(const OpticalParams& p, double focal, int wavelength_index);
Grid spiral_phase(int charge, int side);
Grid random_phase(int side, std::uint64_t seed);

// Wrap any phase into [0, 2*pi).
Grid wrap_phase(const Grid& phase);

// Per-wavelength circular convolution followed by sensitivity mixing.
// `scene` holds one grid per wavelength.
std::vector<Grid> sensor_image(const std::vector<Grid>& scene, const Grid& phi, const OpticalParams& p);

// Second-moment radius in pixels about the PSF centroid.
double second_moment_radius(const Grid& psf);
// Mass fraction inside the (2*half+1)^2 window around the grid center.
double encircled_energy(const Grid& psf, int half);

void write_coeffs_csv(const Vector& coeffs, const std::filesystem::path& path);
Vector read_coeffs_csv(const std::filesystem::path& path);

}  // namespace psfinv::optics
