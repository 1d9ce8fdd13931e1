#pragma once

#include "psfinv/grid.hpp"
#include "psfinv/psf.hpp"

namespace psfinv {

struct WienerConfig {
  double sigma2 = 1e-3;
};

// x = IDFT(conj(H) / (|H|^2 + sigma2) * DFT(y)), circular boundary.
Grid wiener_deconvolve(const Grid& y, const Psf& psf, const WienerConfig& cfg);

struct TvConfig {
  double rho = 2e-3;
  int iters = 100;
  double step = 1.0;
  int inner_iters = 10;
};

struct TvResult {
  Grid x;
  std::vector<double> objective;  // one entry per accepted outer iterate, starting with x0 = y
};

// Isotropic TV with forward differences and a zero difference at the far edge.
double total_variation(const Grid& x);
double tv_objective(const Grid& x, const Grid& y, const Psf& psf, double rho);

// Proximal gradient on 0.5*||y - Hx||^2 + rho*TV(x).
TvResult tv_deconvolve_trace(const Grid& y, const Psf& psf, const TvConfig& cfg);
Grid tv_deconvolve(const Grid& y, const Psf& psf, const TvConfig& cfg);

Grid richardson_lucy(const Grid& y, const Psf& psf, int iters);

double mse(const Grid& a, const Grid& b);
// +inf when mse is zero.
double psnr(const Grid& a, const Grid& b, double peak = 1.0);

// Circular blur followed by Gaussian noise at the given SNR (signal power of the blurred image).
Grid degrade(const Grid& x, const Psf& psf, const NoiseSpec& noise);

}  // namespace psfinv
