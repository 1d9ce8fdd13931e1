#include "psfinv/deconv.hpp"

#include <cmath>
#include <random>

#include "psfinv/conv.hpp"
#include "psfinv/errors.hpp"
#include "psfinv/fft.hpp"

namespace psfinv {

namespace {

void check_shapes(const Grid& y, const Psf& psf) {
  if (y.rows() < psf.side() || y.cols() < psf.side())
    throw InvalidDimension("deconv: image smaller than the PSF");
}

Grid grad_h(const Grid& x) {
  Grid g = Grid::Zero(x.rows(), x.cols());
  g.leftCols(x.cols() - 1) = x.rightCols(x.cols() - 1) - x.leftCols(x.cols() - 1);
  return g;
}

Grid grad_v(const Grid& x) {
  Grid g = Grid::Zero(x.rows(), x.cols());
  g.topRows(x.rows() - 1) = x.bottomRows(x.rows() - 1) - x.topRows(x.rows() - 1);
  return g;
}

// Negative adjoint of (grad_h, grad_v).
Grid divergence(const Grid& ph, const Grid& pv) {
  const Eigen::Index r = ph.rows(), c = ph.cols();
  Grid d = Grid::Zero(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) {
      double v = 0;
      if (j < c - 1) v += ph(i, j);
      if (j > 0) v -= ph(i, j - 1);
      if (i < r - 1) v += pv(i, j);
      if (i > 0) v -= pv(i - 1, j);
      d(i, j) = v;
    }
  return d;
}

// Chambolle dual iteration for prox of lambda*TV at v; (ph, pv) warm-start the dual.
Grid tv_prox(const Grid& v, double lambda, Grid& ph, Grid& pv, int iters) {
  if (lambda <= 0) return v;
  constexpr double tau = 0.125;
  for (int it = 0; it < iters; ++it) {
    const Grid u = divergence(ph, pv) - v / lambda;
    const Grid gh = grad_h(u), gv = grad_v(u);
    const Grid mag = (gh.array().square() + gv.array().square()).sqrt();
    ph = ((ph + tau * gh).array() / (1.0 + tau * mag.array())).matrix();
    pv = ((pv + tau * gv).array() / (1.0 + tau * mag.array())).matrix();
  }
  return v - lambda * divergence(ph, pv);
}

}  // namespace

Grid wiener_deconvolve(const Grid& y, const Psf& psf, const WienerConfig& cfg) {
  check_shapes(y, psf);
  if (!(cfg.sigma2 >= 0) || !std::isfinite(cfg.sigma2)) throw InvalidParameter("wiener: sigma2 must be finite and >= 0");
  const int rows = static_cast<int>(y.rows()), cols = static_cast<int>(y.cols());
  const ComplexGrid h = transfer_function(psf.data(), rows, cols);
  ComplexGrid spec = fft::forward(y);
  const double peak = h.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    const double p = std::norm(h.data()[i]);
    if (cfg.sigma2 == 0 && std::abs(h.data()[i]) <= kSingularTolerance * peak)
      throw NumericFailure("wiener: zero spectral bin with sigma2 = 0");
    spec.data()[i] *= std::conj(h.data()[i]) / (p + cfg.sigma2);
  }
  return fft::inverse_real(spec);
}

double total_variation(const Grid& x) {
  return (grad_h(x).array().square() + grad_v(x).array().square()).sqrt().sum();
}

double tv_objective(const Grid& x, const Grid& y, const Psf& psf, double rho) {
  const auto op = make_operator(psf, static_cast<int>(y.rows()));
  return 0.5 * (convolve(x, op) - y).squaredNorm() + rho * total_variation(x);
}

TvResult tv_deconvolve_trace(const Grid& y, const Psf& psf, const TvConfig& cfg) {
  check_shapes(y, psf);
  if (y.rows() != y.cols()) throw InvalidDimension("tv: image must be square");
  if (!(cfg.rho >= 0) || !(cfg.step > 0) || cfg.iters < 1 || cfg.inner_iters < 1)
    throw InvalidParameter("tv: need rho >= 0, step > 0, iters >= 1");
  const auto op = make_operator(psf, static_cast<int>(y.rows()));
  constexpr double slack = 1e-8;
  constexpr int max_increases = 10;

  TvResult res;
  res.x = y;
  double obj = tv_objective(res.x, y, psf, cfg.rho);
  res.objective.push_back(obj);
  Grid ph = Grid::Zero(y.rows(), y.cols()), pv = ph;
  int increases = 0;
  for (int it = 0; it < cfg.iters; ++it) {
    const Grid v = res.x - cfg.step * correlate(convolve(res.x, op) - y, op);
    const Grid cand = tv_prox(v, cfg.step * cfg.rho, ph, pv, cfg.inner_iters);
    const double c = tv_objective(cand, y, psf, cfg.rho);
    if (!std::isfinite(c)) throw StepSizeError("tv: objective is not finite; reduce the step", res.objective);
    if (c > obj + slack * std::max(1.0, std::abs(obj))) {
      // Rejected; the warm dual keeps refining the prox on the next attempt.
      if (++increases >= max_increases)
        throw StepSizeError("tv: objective increased on 10 consecutive iterations; reduce the step", res.objective);
      continue;
    }
    increases = 0;
    res.x = cand;
    obj = c;
    res.objective.push_back(obj);
  }
  return res;
}

Grid tv_deconvolve(const Grid& y, const Psf& psf, const TvConfig& cfg) { return tv_deconvolve_trace(y, psf, cfg).x; }

Grid richardson_lucy(const Grid& y, const Psf& psf, int iters) {
  check_shapes(y, psf);
  if (y.rows() != y.cols()) throw InvalidDimension("richardson_lucy: image must be square");
  if (iters < 1) throw InvalidParameter("richardson_lucy: iters must be >= 1");
  if ((y.array() < 0).any()) throw InvalidInput("richardson_lucy: negative input pixels");
  const auto op = make_operator(psf, static_cast<int>(y.rows()));
  constexpr double floor = 1e-12;
  Grid x = y;
  for (int it = 0; it < iters; ++it) {
    const Grid hx = convolve(x, op);
    Grid ratio(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.size(); ++i)
      ratio.data()[i] = hx.data()[i] > floor ? y.data()[i] / hx.data()[i] : 0.0;
    x = x.cwiseProduct(correlate(ratio, op)).cwiseMax(0.0);
  }
  return x;
}

double mse(const Grid& a, const Grid& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidDimension("mse: shape mismatch");
  if (a.size() == 0) throw InvalidDimension("mse: empty grids");
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

double psnr(const Grid& a, const Grid& b, double peak) {
  const double m = mse(a, b);
  if (m == 0) return kInf;
  return 10.0 * std::log10(peak * peak / m);
}

Grid degrade(const Grid& x, const Psf& psf, const NoiseSpec& noise) {
  if (x.rows() != x.cols()) throw InvalidDimension("degrade: image must be square");
  Grid y = convolve(x, make_operator(psf, static_cast<int>(x.rows())));
  if (std::isnan(noise.snr_db) || noise.snr_db == -kInf) throw InvalidParameter("degrade: snr_db must be finite");
  if (noise.is_clean()) return y;
  const double power = y.squaredNorm() / static_cast<double>(y.size());
  const double sigma = std::sqrt(power / std::pow(10.0, noise.snr_db / 10.0));
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] += normal(rng);
  return y;
}

}  // namespace psfinv
