#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "psfinv/deconv.hpp"
#include "psfinv/metric_net.hpp"
#include "psfinv/psf.hpp"
#include "psfinv/stats.hpp"

namespace psfinv::bench {

struct BenchConfig {
  int side = 32;         // PSF side
  int image_side = 64;   // scene side
  metric::TrainConfig metric;
  double measure_snr_db = 40.0;  // measurement noise for the base report
  std::uint64_t noise_seed = 7;
  TvConfig tv{0.02, 100, 1.0, 10};
  int rl_iters = 30;
  std::vector<double> wiener_grid = {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  std::filesystem::path scene_dir;  // optional extra PGM/PPM scenes (up to 4)
  std::uint64_t seed = 1;
  double defocus = 0.5;    // relative focal error of the spread optical PSFs
  int motion_focused = 3;  // motion blur lengths
  int motion_spread = 15;
  int threads = 1;
};

// Four synthetic scenes plus up to four files from cfg.scene_dir.
std::vector<Grid> scene_set(const BenchConfig& cfg);
// Scene used only for hyperparameter tuning.
Grid held_out_scene(const BenchConfig& cfg);

// Wiener sigma2 from cfg.wiener_grid minimizing the mean MSE over all PSFs on the held-out scene.
double tune_wiener_sigma2(const std::vector<Psf>& psfs, const BenchConfig& cfg, const NoiseSpec& noise);

struct SolverErrors {
  double wiener = 0, tv = 0, rl = 0;
};

// Mean MSE of each solver over the scenes; scene i uses noise seed noise.seed + i.
SolverErrors measure_solvers(const Psf& psf, const std::vector<Grid>& scenes, const NoiseSpec& noise,
                             double wiener_sigma2, const BenchConfig& cfg);

struct ReportRow {
  std::string psf_id;
  double metric = 0;
  double kappa = 0;
  double kappa_hth = 0;
  double wiener_mse = 0;
  double tv_mse = 0;
  double rl_mse = 0;
  double wall_time_metric_s = 0;
  double wall_time_kappa_s = 0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::vector<Psf> psfs;  // same order as rows; not serialized
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string timestamp;
  double wiener_sigma2 = 0;
};

// Stable FNV-1a digest (16 hex digits) of a resolved configuration text.
std::string digest(const std::string& text);
// Canonical text of every BenchConfig field.
std::string describe(const BenchConfig& cfg);

// Metric, circulant kappa and solver errors for each PSF.
ExperimentReport evaluate_psfs(const std::vector<Psf>& psfs, const BenchConfig& cfg);

// Impulse, Fresnel/spiral focused and spread, motion short and long, diffuser.
std::vector<Psf> suite_corpus(const BenchConfig& cfg);
ExperimentReport psf_suite_report(const BenchConfig& cfg);

ExperimentReport gaussian_sweep(const std::vector<double>& sigmas, const BenchConfig& cfg);

struct TimingRow {
  int side = 0;
  long k = 0;
  double metric_s = 0;  // median
  double kappa_s = 0;   // median
  std::vector<double> metric_runs, kappa_runs;
};

// Median wall time of train_metric and condition_number_dense per side.
std::vector<TimingRow> timing_benchmark(const std::vector<int>& sides, const BenchConfig& cfg, int reps = 3);

struct CorrelationStudy {
  stats::CorrelationMatrix pearson;
  stats::CorrelationMatrix spearman;
  std::optional<NoiseSpec> noise;
  double wiener_sigma2 = 0;
};

// Columns metric, log10_kappa, wiener_mse, tv_mse, rl_mse. With noise set the
// solver errors are re-measured at that SNR (sigma2 re-tuned); otherwise the report's errors are used.
CorrelationStudy correlation_study(const ExperimentReport& report, const std::optional<NoiseSpec>& noise,
                                   const BenchConfig& cfg);

// Emission. Wall times and the timestamp go to separate *_timing files so the
// remaining outputs are byte-identical across reruns.
void write_report(const ExperimentReport& r, const std::filesystem::path& dir, const std::string& stem);
void write_timing(const std::vector<TimingRow>& rows, const std::filesystem::path& dir);
void write_correlation(const CorrelationStudy& c, const std::filesystem::path& dir, const std::string& stem);

}  // namespace psfinv::bench
