#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "psfinv/conv.hpp"
#include "psfinv/metric_net.hpp"
#include "psfinv/optics.hpp"
#include "psfinv/psf.hpp"

namespace psfinv::e2e {

// Scenes and their additive sensor-noise realizations (empty noise = noiseless).
struct Batch {
  std::vector<Grid> scenes;
  std::vector<Grid> noise;
};

struct RecoveryParams {
  double log_sigma2 = -6.9;
};

struct WienerGrads {
  double loss = 0;           // mean over scenes of the per-pixel MSE
  Grid grad_psf;             // same shape as the kernel
  double grad_log_sigma2 = 0;
};

// Loss of Wiener(convolve(x, h) + e, h, sigma2) against x and its gradients.
// The kernel is used as given (no renormalization), so gradients are w.r.t. its raw entries.
WienerGrads wiener_layer_grads(const Batch& batch, const Grid& kernel, const RecoveryParams& rp);
WienerGrads wiener_layer_grads(const Batch& batch, const Psf& psf, const RecoveryParams& rp);

struct E2EConfig {
  double gamma = 0.0;
  int outer_epochs = 100;
  int inner_epochs = 50;
  int initial_inner_epochs = 300;  // first inner solve, before any warm start
  double outer_lr = 0.2;           // on coefficients in design-wavelength radians
  double sigma_lr = 0.05;
  double inner_lr = 1e-3;
  int num_coeffs = 15;
  int side = 64;
  int hidden = 256;
  int batch_size = 4;
  bool warm_start = true;
  std::uint64_t seed = 1;
  double noise_std = 0.01;  // sensor noise standard deviation on [0, 1] scenes
  // Initial design: defocus term of a lens focused at the sensor, scaled by this
  // fraction (0 starts from a flat element, 1 from the in-focus lens).
  double init_focus = 0.8;
  std::filesystem::path dataset_dir;
  bool synthetic = true;
  // Test-harness switch: drops every regularizer code path (no inner training).
  bool regularizer_enabled = true;

  void validate() const;
};

// Everything that changes across outer steps.
struct DesignState {
  Vector theta;  // Zernike coefficients in radians of phase at the design wavelength
  RecoveryParams rp;
  Vector m, v;   // Adam moments over [theta, log_sigma2]
  long t = 0;
};

struct Problem {
  optics::OpticalParams optics;
  optics::ZernikeBasis basis;
  double coeff_scale = 0;  // meters of height per radian of design phase

  static Problem make(const E2EConfig& cfg);
  // Defocus coefficient (radians) that cancels the Fresnel quadratic phase at the design wavelength.
  double focus_theta() const;
  Vector initial_theta(const E2EConfig& cfg) const;
  Vector coeffs_m(const Vector& theta) const { return theta * coeff_scale; }
};

struct StepBreakdown {
  double outer_loss = 0;
  double recon_mse = 0;
  double metric = 0;
  double gamma_term = 0;
  Vector grad_theta;
  double grad_log_sigma2 = 0;
};

// Loss and gradient of recon + gamma * metric at theta (no update).
// The recon term averages over wavelength channels; the metric acts on the mean PSF.
StepBreakdown outer_objective(const Problem& prob, const Vector& theta, const RecoveryParams& rp,
                              const metric::MetricNet* net, const Batch& batch, const E2EConfig& cfg);

// Objective plus one Adam step on (theta, log_sigma2).
StepBreakdown outer_step(const Problem& prob, DesignState& state, const metric::MetricNet* net, const Batch& batch,
                         const E2EConfig& cfg);

// Mean of the per-wavelength PSFs.
Psf mean_psf(const Problem& prob, const Vector& theta);

struct HistoryRow {
  int epoch = 0;
  double outer_loss = 0;
  double recon_mse = 0;
  double metric = 0;
  double gamma_term = 0;
  double psnr = 0;
};

struct E2EResult {
  Vector coeffs;  // meters
  Vector theta;
  RecoveryParams rp;
  metric::MetricNet net;
  std::vector<HistoryRow> history;
  Psf final_psf = impulse_psf(1);
  double final_metric = 0;  // fresh standard metric training on the final PSF
  double final_psnr = 0;
  double final_kappa = 0;
  double inner_seconds = 0;
};

E2EResult e2e_optimize(const E2EConfig& cfg);
E2EResult e2e_optimize(const E2EConfig& cfg, const Batch& batch);

// Scenes from cfg.dataset_dir (or the synthetic generator) with seeded noise.
Batch make_batch(const E2EConfig& cfg);

void write_history_csv(const std::vector<HistoryRow>& h, const std::filesystem::path& path);

struct SweepRow {
  double gamma = 0;
  double psnr = 0;
  double metric = 0;
  double kappa = 0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  double spearman_metric_psnr = 0;  // NaN when undefined
};

// gamma = 0 is prepended when absent.
SweepReport gamma_sweep(const E2EConfig& cfg, std::vector<double> gammas);
nlohmann::json to_json(const SweepReport& r);

}  // namespace psfinv::e2e
