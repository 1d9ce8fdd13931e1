#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "psfinv/grid.hpp"
#include "psfinv/psf.hpp"

namespace psfinv::metric {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Two-layer ReLU mapper: out = w2 * relu(w1 * h + b1) + b2.
struct MetricNet {
  Matrix w1;  // hidden x k
  Vector b1;  // hidden
  Matrix w2;  // k x hidden
  Vector b2;  // k

  int k() const { return static_cast<int>(w1.cols()); }
  int hidden() const { return static_cast<int>(w1.rows()); }
  bool all_finite() const { return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite(); }
  bool operator==(const MetricNet& o) const { return w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2; }
};

// Same shapes as MetricNet; used for gradients and Adam moments.
using ParamBlocks = MetricNet;

ParamBlocks zeros_like(const MetricNet& net);

struct AdamState {
  ParamBlocks m;
  ParamBlocks v;
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_net(const MetricNet& net);
};

// Objective minimized during training. The reported metric is always the
// residual norm; `mean_squared` trains on ||r||^2 / k instead.
enum class TrainLoss { norm, mean_squared };

struct TrainConfig {
  double lr = 1e-3;
  int epochs = 300;
  int hidden = 256;
  std::uint64_t seed = 1;
  std::optional<NoiseSpec> noise;
  bool resample_noise = false;
  TrainLoss loss = TrainLoss::mean_squared;

  void validate() const;
};

struct MetricResult {
  double value = 0;       // best residual norm over all epochs
  double best_value = 0;  // same as value; kept for report compatibility
  int best_epoch = 0;
  std::vector<double> loss_curve;  // residual norm before each update
  MetricNet net;
  bool converged = false;
};

MetricNet init_net(int k, int hidden, std::uint64_t seed);

Vector forward(const MetricNet& net, const Vector& h);

// Unit impulse target of length side*side with the 1 at the grid center.
Vector unit_impulse(int side);

struct LossGrads {
  double loss = 0;      // objective value (norm or mean squared)
  double residual = 0;  // ||delta - out||
  ParamBlocks params;
  Vector input;
  bool converged = false;  // residual exactly zero; gradients are zero
};

LossGrads loss_and_grads(const MetricNet& net, const Vector& h, const Vector& delta,
                         TrainLoss loss = TrainLoss::norm);

// Standard bias-corrected Adam; increments state.t first.
void adam_step(MetricNet& params, const ParamBlocks& grads, AdamState& state, double lr);

MetricResult train_metric(const Psf& psf, const TrainConfig& cfg);

// Continue training from an existing network and optimizer state (warm start).
// `state` is updated in place so the next call can resume from it.
MetricResult train_from(const Psf& psf, const TrainConfig& cfg, MetricNet net, AdamState& state);

// Residual norm of a trained net on an input, plus d(norm)/d(input).
struct MetricGradient {
  double value = 0;
  Vector input_grad;
};
MetricGradient metric_input_gradient(const MetricNet& net, const Vector& h, const Vector& delta);

void save_checkpoint(const MetricNet& net, const std::filesystem::path& path);
MetricNet load_checkpoint(const std::filesystem::path& path);

void write_loss_curve_csv(const std::vector<double>& curve, const std::filesystem::path& path);
nlohmann::json result_json(const MetricResult& r, const std::string& psf_id, const TrainConfig& cfg,
                           const std::string& loss_curve_path);

}  // namespace psfinv::metric
