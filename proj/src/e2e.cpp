#include "psfinv/e2e.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

#include "psfinv/errors.hpp"
#include "psfinv/fft.hpp"
#include "psfinv/image_io.hpp"
#include "psfinv/report.hpp"
#include "psfinv/stats.hpp"

namespace psfinv::e2e {

using cd = std::complex<double>;

WienerGrads wiener_layer_grads(const Batch& batch, const Grid& kernel, const RecoveryParams& rp) {
  if (batch.scenes.empty()) throw InvalidInput("wiener layer: empty batch");
  if (!batch.noise.empty() && batch.noise.size() != batch.scenes.size())
    throw InvalidDimension("wiener layer: one noise grid per scene required");
  if (!std::isfinite(rp.log_sigma2)) throw NumericFailure("wiener layer: log_sigma2 is not finite");
  const int rows = static_cast<int>(batch.scenes[0].rows()), cols = static_cast<int>(batch.scenes[0].cols());
  const ComplexGrid h = transfer_function(kernel, rows, cols);
  const double s = std::exp(rp.log_sigma2);
  const double peak = h.cwiseAbs().maxCoeff();
  if (s < 1e-12 && h.cwiseAbs().minCoeff() <= kSingularTolerance * peak)
    throw NumericFailure("wiener layer: singular spectrum with sigma2 < 1e-12");

  const double n = static_cast<double>(rows) * cols;
  const double scale = 1.0 / (n * n * static_cast<double>(batch.scenes.size()));
  WienerGrads out;
  ComplexGrid gsum = ComplexGrid::Zero(rows, cols);
  double ds = 0;
  for (std::size_t b = 0; b < batch.scenes.size(); ++b) {
    const Grid& x = batch.scenes[b];
    if (x.rows() != rows || x.cols() != cols) throw InvalidDimension("wiener layer: scenes differ in shape");
    const ComplexGrid X = fft::forward(x);
    const ComplexGrid E = batch.noise.empty() ? ComplexGrid::Zero(rows, cols) : fft::forward(batch.noise[b]);
    for (Eigen::Index i = 0; i < X.size(); ++i) {
      const cd H = h.data()[i];
      const double D = std::norm(H) + s;
      // Frequency-domain reconstruction error is N / D.
      const cd N = std::conj(H) * E.data()[i] - s * X.data()[i];
      const double N2 = std::norm(N);
      out.loss += N2 / (D * D);
      gsum.data()[i] += N * std::conj(E.data()[i]) / (D * D) - 2.0 * N2 * std::conj(H) / (D * D * D);
      ds += -2.0 * std::real(std::conj(N) * X.data()[i]) / (D * D) - 2.0 * N2 / (D * D * D);
    }
  }
  out.loss *= scale;
  const Grid g_embedded = 2.0 * scale * fft::forward(gsum).real();
  out.grad_psf = gather_kernel(g_embedded, static_cast<int>(kernel.rows()), static_cast<int>(kernel.cols()));
  out.grad_log_sigma2 = s * ds * scale;
  return out;
}

WienerGrads wiener_layer_grads(const Batch& batch, const Psf& psf, const RecoveryParams& rp) {
  return wiener_layer_grads(batch, psf.data(), rp);
}

void E2EConfig::validate() const {
  if (!(gamma >= 0) || !std::isfinite(gamma)) throw InvalidParameter("e2e: gamma must be finite and >= 0");
  if (outer_epochs < 1 || inner_epochs < 1 || initial_inner_epochs < 1) throw InvalidParameter("e2e: epochs must be >= 1");
  if (!(outer_lr > 0) || !(inner_lr > 0) || !(sigma_lr > 0)) throw InvalidParameter("e2e: learning rates must be > 0");
  if (num_coeffs < 1) throw InvalidParameter("e2e: need at least one Zernike coefficient");
  if (side < 16) throw InvalidDimension("e2e: side must be >= 16");
  if (hidden < 1 || batch_size < 1) throw InvalidParameter("e2e: hidden and batch_size must be >= 1");
  if (!std::isfinite(init_focus)) throw InvalidParameter("e2e: init_focus must be finite");
  if (!(noise_std >= 0)) throw InvalidParameter("e2e: noise_std must be >= 0");
}

Problem Problem::make(const E2EConfig& cfg) {
  Problem p;
  p.optics = optics::OpticalParams::desk_default(cfg.side);
  p.basis = optics::zernike_basis(cfg.num_coeffs, cfg.side);
  const int w = p.optics.design_index();
  p.coeff_scale = p.optics.wavelengths[w] / (2.0 * kPi * p.optics.delta_eta);
  return p;
}

double Problem::focus_theta() const {
  const int w = optics.design_index();
  const int n = optics.aperture_side;
  const double quad = kPi / (optics.wavelengths[w] * optics.z);
  // Least-squares defocus coefficient of the negated Fresnel quadratic phase over the disk.
  const Grid& z4 = basis.grids.at(3);
  double num = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double y = (n / 2 - i) * optics.pitch, x = (j - n / 2) * optics.pitch;
      num -= quad * (x * x + y * y) * z4(i, j);
    }
  return num / z4.squaredNorm();
}

Vector Problem::initial_theta(const E2EConfig& cfg) const {
  Vector theta = Vector::Zero(cfg.num_coeffs);
  if (cfg.num_coeffs >= 4) theta(3) = cfg.init_focus * focus_theta();
  return theta;
}

namespace {

std::vector<optics::PsfSensitivity> render_all(const Problem& prob, const Vector& theta) {
  const Vector a = prob.coeffs_m(theta);
  std::vector<optics::PsfSensitivity> out;
  try {
    for (std::size_t w = 0; w < prob.optics.wavelengths.size(); ++w)
      out.push_back(optics::render_psf_sensitivity(a, prob.basis, prob.optics, static_cast<int>(w)));
  } catch (const AliasingError& e) {
    throw e.with_coeffs(std::vector<double>(a.data(), a.data() + a.size()));
  }
  return out;
}

}  // namespace

Psf mean_psf(const Problem& prob, const Vector& theta) {
  const Vector a = prob.coeffs_m(theta);
  const auto h = optics::make_heightmap(a, prob.basis);
  Grid sum = Grid::Zero(prob.optics.aperture_side, prob.optics.aperture_side);
  try {
    for (std::size_t w = 0; w < prob.optics.wavelengths.size(); ++w)
      sum += optics::render_psf(h, prob.optics, static_cast<int>(w)).data();
  } catch (const AliasingError& e) {
    throw e.with_coeffs(std::vector<double>(a.data(), a.data() + a.size()));
  }
  return Psf(sum / static_cast<double>(prob.optics.wavelengths.size()), "e2e_mean");
}

StepBreakdown outer_objective(const Problem& prob, const Vector& theta, const RecoveryParams& rp,
                              const metric::MetricNet* net, const Batch& batch, const E2EConfig& cfg) {
  const auto sens = render_all(prob, theta);
  const double nw = static_cast<double>(sens.size());
  const Eigen::Index L = theta.size();
  StepBreakdown out;
  out.grad_theta = Vector::Zero(L);
  for (const auto& s : sens) {
    const WienerGrads g = wiener_layer_grads(batch, s.psf, rp);
    out.recon_mse += g.loss / nw;
    out.grad_log_sigma2 += g.grad_log_sigma2 / nw;
    for (Eigen::Index l = 0; l < L; ++l)
      out.grad_theta(l) += g.grad_psf.cwiseProduct(s.d_coeff[l]).sum() * prob.coeff_scale / nw;
  }
  out.outer_loss = out.recon_mse;
  if (!cfg.regularizer_enabled) {
    out.metric = std::nan("");
    return out;
  }
  if (net == nullptr) throw InvalidInput("e2e: regularizer enabled but no metric network given");
  Grid hbar = Grid::Zero(prob.optics.aperture_side, prob.optics.aperture_side);
  for (const auto& s : sens) hbar += s.psf / nw;
  const auto mg = metric::metric_input_gradient(*net, flatten(hbar), metric::unit_impulse(static_cast<int>(hbar.rows())));
  const Grid gh = unflatten(mg.input_grad, hbar.rows(), hbar.cols());
  Vector reg = Vector::Zero(L);
  for (const auto& s : sens)
    for (Eigen::Index l = 0; l < L; ++l) reg(l) += gh.cwiseProduct(s.d_coeff[l]).sum() * prob.coeff_scale / nw;
  out.metric = mg.value;
  out.gamma_term = cfg.gamma * mg.value;
  out.outer_loss = out.recon_mse + out.gamma_term;
  out.grad_theta += cfg.gamma * reg;
  return out;
}

StepBreakdown outer_step(const Problem& prob, DesignState& st, const metric::MetricNet* net, const Batch& batch,
                         const E2EConfig& cfg) {
  StepBreakdown b = outer_objective(prob, st.theta, st.rp, net, batch, cfg);
  const Eigen::Index L = st.theta.size();
  if (!b.grad_theta.allFinite() || !std::isfinite(b.grad_log_sigma2))
    throw NumericFailure("e2e: non-finite outer gradient");
  if (st.m.size() != L + 1) {
    st.m = Vector::Zero(L + 1);
    st.v = Vector::Zero(L + 1);
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++st.t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
  for (Eigen::Index i = 0; i <= L; ++i) {
    const double g = i < L ? b.grad_theta(i) : b.grad_log_sigma2;
    st.m(i) = beta1 * st.m(i) + (1 - beta1) * g;
    st.v(i) = beta2 * st.v(i) + (1 - beta2) * g * g;
    const double step = (i < L ? cfg.outer_lr : cfg.sigma_lr) * (st.m(i) / c1) / (std::sqrt(st.v(i) / c2) + eps);
    if (i < L)
      st.theta(i) -= step;
    else
      st.rp.log_sigma2 -= step;
  }
  return b;
}

Batch make_batch(const E2EConfig& cfg) {
  const auto set = image::ingest_images(cfg.dataset_dir, cfg.side, cfg.synthetic, cfg.seed);
  Batch b;
  b.scenes = set.scenes;
  if (b.scenes.size() < 4 && cfg.synthetic) {
    const auto syn = image::synthetic_scenes(cfg.side, cfg.seed);
    for (std::size_t i = 0; b.scenes.size() < 4 && i < syn.scenes.size(); ++i) b.scenes.push_back(syn.scenes[i]);
  }
  if (cfg.noise_std > 0) {
    std::mt19937_64 rng(cfg.seed ^ 0x5DEECE66Dull);
    std::normal_distribution<double> normal(0.0, cfg.noise_std);
    for (const auto& s : b.scenes) {
      Grid e(s.rows(), s.cols());
      for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = normal(rng);
      b.noise.push_back(std::move(e));
    }
  }
  return b;
}

namespace {

Batch slice(const Batch& b, std::size_t start, std::size_t count) {
  Batch out;
  const std::size_t end = std::min(b.scenes.size(), start + count);
  out.scenes.assign(b.scenes.begin() + start, b.scenes.begin() + end);
  if (!b.noise.empty()) out.noise.assign(b.noise.begin() + start, b.noise.begin() + end);
  return out;
}

double to_psnr(double mse) { return mse > 0 ? 10.0 * std::log10(1.0 / mse) : kInf; }

}  // namespace

E2EResult e2e_optimize(const E2EConfig& cfg) { return e2e_optimize(cfg, make_batch(cfg)); }

E2EResult e2e_optimize(const E2EConfig& cfg, const Batch& batch) {
  cfg.validate();
  if (batch.scenes.empty()) throw ConfigError("e2e: no training scenes");
  const Problem prob = Problem::make(cfg);
  DesignState st;
  st.theta = prob.initial_theta(cfg);
  const int k = cfg.side * cfg.side;

  E2EResult res;
  metric::MetricNet net;
  metric::AdamState inner_state;
  if (cfg.regularizer_enabled) {
    net = metric::init_net(k, cfg.hidden, cfg.seed);
    inner_state = metric::AdamState::for_net(net);
  }
  for (int epoch = 0; epoch < cfg.outer_epochs; ++epoch) {
    if (cfg.regularizer_enabled) {
      const Psf h = mean_psf(prob, st.theta);
      metric::TrainConfig ic;
      ic.lr = cfg.inner_lr;
      ic.hidden = cfg.hidden;
      ic.seed = cfg.seed;
      const bool warm = cfg.warm_start && epoch > 0;
      ic.epochs = warm ? cfg.inner_epochs : cfg.initial_inner_epochs;
      if (!warm) {
        net = metric::init_net(k, cfg.hidden, cfg.seed);
        inner_state = metric::AdamState::for_net(net);
      }
      const auto t0 = std::chrono::steady_clock::now();
      net = metric::train_from(h, ic, std::move(net), inner_state).net;
      res.inner_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    HistoryRow row;
    row.epoch = epoch;
    std::size_t chunks = 0;
    for (std::size_t start = 0; start < batch.scenes.size(); start += cfg.batch_size, ++chunks) {
      const auto b = outer_step(prob, st, cfg.regularizer_enabled ? &net : nullptr,
                                slice(batch, start, cfg.batch_size), cfg);
      row.outer_loss += b.outer_loss;
      row.recon_mse += b.recon_mse;
      row.metric += b.metric;
      row.gamma_term += b.gamma_term;
    }
    row.outer_loss /= chunks;
    row.recon_mse /= chunks;
    row.metric /= chunks;
    row.gamma_term /= chunks;
    row.psnr = to_psnr(row.recon_mse);
    res.history.push_back(row);
  }
  res.theta = st.theta;
  res.coeffs = prob.coeffs_m(st.theta);
  res.rp = st.rp;
  res.net = std::move(net);
  res.final_psf = mean_psf(prob, st.theta);

  E2EConfig eval = cfg;
  eval.regularizer_enabled = false;
  res.final_psnr = to_psnr(outer_objective(prob, st.theta, st.rp, nullptr, batch, eval).recon_mse);
  metric::TrainConfig mc;
  mc.hidden = cfg.hidden;
  mc.seed = cfg.seed;
  res.final_metric = metric::train_metric(res.final_psf, mc).value;
  res.final_kappa = condition_number_circulant(res.final_psf, cfg.side).kappa;
  return res;
}

void write_history_csv(const std::vector<HistoryRow>& h, const std::filesystem::path& path) {
  report::Table t{{"epoch", "outer_loss", "recon_mse", "metric", "gamma_term", "psnr"}, {}};
  for (const auto& r : h)
    t.rows.push_back({std::to_string(r.epoch), report::num(r.outer_loss), report::num(r.recon_mse), report::num(r.metric),
                      report::num(r.gamma_term), report::num(r.psnr)});
  report::write_csv(t, path);
}

SweepReport gamma_sweep(const E2EConfig& cfg, std::vector<double> gammas) {
  if (std::find(gammas.begin(), gammas.end(), 0.0) == gammas.end()) gammas.insert(gammas.begin(), 0.0);
  if (gammas.size() < 2) throw InvalidParameter("gamma_sweep: need at least two gamma values");
  const Batch batch = make_batch(cfg);
  SweepReport rep;
  for (double g : gammas) {
    E2EConfig c = cfg;
    c.gamma = g;
    const auto r = e2e_optimize(c, batch);
    rep.rows.push_back({g, r.final_psnr, r.final_metric, r.final_kappa});
  }
  std::vector<double> m, p;
  for (const auto& r : rep.rows) m.push_back(r.metric), p.push_back(r.psnr);
  try {
    rep.spearman_metric_psnr = stats::spearman(m, p);
  } catch (const UndefinedCorrelation&) {
    rep.spearman_metric_psnr = std::nan("");
  }
  return rep;
}

nlohmann::json to_json(const SweepReport& r) {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : r.rows)
    j["rows"].push_back({{"gamma", row.gamma},
                         {"psnr", report::json_num(row.psnr)},
                         {"metric", report::json_num(row.metric)},
                         {"kappa", report::json_num(row.kappa)}});
  j["spearman_metric_psnr"] = report::json_num(r.spearman_metric_psnr);
  return j;
}

}  // namespace psfinv::e2e
