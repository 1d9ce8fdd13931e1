#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "psfinv/grid.hpp"

namespace psfinv {

// Non-negative square kernel with unit mass. The constructor normalizes.
class Psf {
 public:
  Psf(Grid data, std::string id);

  int side() const { return static_cast<int>(data_.rows()); }
  int k() const { return side() * side(); }
  const Grid& data() const { return data_; }
  const std::string& id() const { return id_; }
  double operator()(int r, int c) const { return data_(r, c); }

  // Row-major flattening; length side*side.
  Vector flatten() const { return psfinv::flatten(data_); }

  Psf with_id(std::string id) const { return Psf(data_, std::move(id)); }

 private:
  Grid data_;
  std::string id_;
};

struct NoiseSpec {
  double snr_db = kInf;  // +inf means clean
  std::uint64_t seed = 0;

  static NoiseSpec clean() { return {}; }
  bool is_clean() const { return snr_db == kInf; }
};

Psf impulse_psf(int side);
Psf gaussian_psf(int side, double sigma);
Psf motion_blur_psf(int side, int length, double angle_deg);
// Speckle PSF from a uniformly random phase mask rendered through the optics model.
Psf diffuser_psf(int side, std::uint64_t seed);
Psf box_psf(int side, int width);

// Raw additive noise realization at the requested SNR, before any clamping.
Grid draw_noise(const Psf& psf, const NoiseSpec& spec);
// psf + noise, clamped to >= 0 and renormalized to unit mass.
Psf add_noise(const Psf& psf, const NoiseSpec& spec);

// Shannon entropy in nats.
double entropy(const Psf& psf);
// Center-crop (or keep) to the given odd/even side and renormalize.
Psf crop_center(const Psf& psf, int side);

void write_psf_text(const Psf& psf, const std::filesystem::path& path);
Psf read_psf_text(const std::filesystem::path& path, std::string id = "file");
void write_psf_raster(const Psf& psf, const std::filesystem::path& path);
Psf read_psf_raster(const std::filesystem::path& path, std::string id = "file");

}  // namespace psfinv
