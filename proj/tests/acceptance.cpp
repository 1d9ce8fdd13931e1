// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// nonzero when any selected criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "psfinv/bench.hpp"
#include "psfinv/cli.hpp"
#include "psfinv/conv.hpp"
#include "psfinv/deconv.hpp"
#include "psfinv/e2e.hpp"
#include "psfinv/metric_net.hpp"
#include "psfinv/stats.hpp"

using namespace psfinv;
namespace fs = std::filesystem;

namespace {

// Thresholds.
constexpr double kImpulseMetricMax = 1e-6;
constexpr double kImpulseSeconds = 60;
constexpr double kGaussianPearsonMin = 0.9;
constexpr double kGaussianSeconds = 5 * 60;
constexpr double kMetricTimeRatioMax = 8;
constexpr double kKappaTimeRatioMin = 30;
constexpr double kTimingSeconds = 10 * 60;
constexpr double kSuiteSeconds = 10 * 60;
constexpr double kNoisyWienerPearsonMin = 0.8;
constexpr double kE2EPsnrSlackDb = 0.1;
constexpr double kE2ESeconds = 20 * 60;
constexpr double kE2EGamma = 1e-3;
constexpr double kMlpGradTol = 1e-4;
constexpr double kWienerGradTol = 1e-3;
constexpr double kOuterGradTol = 5e-3;
constexpr int kGradInstances = 20;
constexpr double kGradSeconds = 2 * 60;
constexpr double kKappaOracleTol = 1e-8;
constexpr double kConvOracleTol = 1e-10;
constexpr double kAdjointTol = 1e-10;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// 1
Verdict impulse_optimality() {
  Verdict v;
  const auto t0 = Clock::now();
  const Psf imp = impulse_psf(32);
  metric::TrainConfig cfg;  // d = 256, 300 epochs
  const auto r = metric::train_metric(imp, cfg);
  const double kappa = condition_number_circulant(imp, 32).kappa;
  const double secs = since(t0);
  v.detail << "metric " << g(r.value) << " kappa " << g(kappa) << " time " << g(secs) << "s";
  v.require(r.value <= kImpulseMetricMax, "metric <= 1e-6");
  v.require(kappa == 1.0, "kappa == 1");
  v.require(secs <= kImpulseSeconds, "runtime");
  return v;
}

// 2
Verdict gaussian_monotonicity() {
  Verdict v;
  const auto t0 = Clock::now();
  const std::vector<double> sigmas{0.5, 1, 2, 4};
  const auto rep = bench::gaussian_sweep(sigmas, bench::BenchConfig{});
  std::vector<double> m, w;
  for (const auto& row : rep.rows) {
    m.push_back(row.metric);
    w.push_back(row.wiener_mse);
  }
  const double rho_m = stats::spearman(sigmas, m), rho_w = stats::spearman(sigmas, w), r = stats::pearson(m, w);
  const double secs = since(t0);
  v.detail << "spearman(sigma,metric) " << g(rho_m) << " spearman(sigma,wiener) " << g(rho_w) << " pearson "
           << g(r) << " time " << g(secs) << "s";
  v.require(rho_m == 1.0, "metric monotone");
  v.require(rho_w == 1.0, "wiener monotone");
  v.require(r >= kGaussianPearsonMin, "pearson >= 0.9");
  v.require(secs <= kGaussianSeconds, "runtime");
  return v;
}

// 3
Verdict timing_scaling() {
  Verdict v;
  const auto t0 = Clock::now();
  const auto rows = bench::timing_benchmark({16, 32, 64}, bench::BenchConfig{}, 3);
  const double metric_ratio = rows.back().metric_s / rows.front().metric_s;
  const double kappa_ratio = rows.back().kappa_s / rows.front().kappa_s;
  const double secs = since(t0);
  for (const auto& r : rows) v.detail << "k=" << r.k << " metric " << g(r.metric_s) << "s kappa " << g(r.kappa_s) << "s; ";
  v.detail << "ratios " << g(metric_ratio) << " / " << g(kappa_ratio) << " time " << g(secs) << "s";
  v.require(metric_ratio <= kMetricTimeRatioMax, "metric time ratio <= 8");
  v.require(kappa_ratio >= kKappaTimeRatioMin, "dense kappa time ratio >= 30");
  v.require(secs <= kTimingSeconds, "runtime");
  return v;
}

const bench::ExperimentReport& suite_report(double* seconds = nullptr) {
  static double secs = 0;
  static const bench::ExperimentReport rep = [] {
    const auto t0 = Clock::now();
    auto r = bench::psf_suite_report(bench::BenchConfig{});
    secs = since(t0);
    return r;
  }();
  if (seconds) *seconds = secs;
  return rep;
}

double metric_of(const bench::ExperimentReport& rep, const std::string& id) {
  for (const auto& r : rep.rows)
    if (r.psf_id == id) return r.metric;
  throw std::runtime_error("missing row " + id);
}

// 4
Verdict suite_ordering() {
  Verdict v;
  double secs = 0;
  const auto& rep = suite_report(&secs);
  for (const std::string fam : {"fresnel", "spiral", "motion"}) {
    const double f = metric_of(rep, fam + "_focused"), s = metric_of(rep, fam + "_spread");
    v.detail << fam << " " << g(f) << " < " << g(s) << "; ";
    v.require(f < s, fam + " focused < spread");
  }
  v.detail << "time " << g(secs) << "s";
  v.require(secs <= kSuiteSeconds, "runtime");
  return v;
}

// 5
Verdict correlation_dominance() {
  Verdict v;
  double suite_secs = 0;
  const auto& rep = suite_report(&suite_secs);
  const auto t0 = Clock::now();
  const bench::BenchConfig cfg;
  struct Case {
    std::string label;
    std::optional<NoiseSpec> noise;
  };
  const std::vector<Case> cases{{"base", std::nullopt}, {"snr25", NoiseSpec{25.0, cfg.noise_seed}},
                                {"snr35", NoiseSpec{35.0, cfg.noise_seed}}};
  for (const auto& c : cases) {
    const auto study = bench::correlation_study(rep, c.noise, cfg);
    const auto& p = study.pearson.values;  // metric, log10_kappa, wiener, tv, rl
    v.detail << c.label << ":";
    const char* solvers[] = {"wiener", "tv", "rl"};
    for (int s = 0; s < 3; ++s) {
      v.detail << " " << solvers[s] << " " << g(p[0][2 + s]) << " vs " << g(p[1][2 + s]);
      v.require(p[0][2 + s] > p[1][2 + s], c.label + " metric beats log10 kappa on " + solvers[s]);
    }
    if (c.noise) v.require(p[0][2] >= kNoisyWienerPearsonMin, c.label + " pearson(metric, wiener) >= 0.8");
    v.detail << "; ";
  }
  const double secs = suite_secs + since(t0);
  v.detail << "time " << g(secs) << "s";
  v.require(secs <= kSuiteSeconds, "runtime");
  return v;
}

// 6
Verdict regularized_e2e() {
  Verdict v;
  const auto t0 = Clock::now();
  e2e::E2EConfig cfg;  // side 64, L = 15, seed 1
  cfg.gamma = 0;
  const auto base = e2e::e2e_optimize(cfg);
  cfg.gamma = kE2EGamma;
  const auto reg = e2e::e2e_optimize(cfg);
  const double secs = since(t0);
  v.detail << "gamma " << g(kE2EGamma) << " metric " << g(reg.final_metric) << " vs " << g(base.final_metric)
           << ", psnr " << g(reg.final_psnr) << " vs " << g(base.final_psnr) << " dB, time " << g(secs) << "s";
  v.require(reg.final_metric < base.final_metric, "regularized metric strictly lower");
  v.require(reg.final_psnr >= base.final_psnr - kE2EPsnrSlackDb, "psnr within 0.1 dB");
  v.require(secs <= kE2ESeconds, "runtime");
  return v;
}

double rel(double a, double b, double floor) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor}); }

// 7
Verdict gradient_suite() {
  Verdict v;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);

  double mlp_worst = 0;
  for (int inst = 0; inst < kGradInstances; ++inst) {
    auto net = metric::init_net(9, 7, 100 + inst);
    for (Eigen::Index i = 0; i < net.b1.size(); ++i) net.b1(i) = u(rng) - 0.5;
    for (Eigen::Index i = 0; i < net.b2.size(); ++i) net.b2(i) = u(rng) - 0.5;
    Vector h(9);
    for (int i = 0; i < 9; ++i) h(i) = u(rng);
    const Vector delta = metric::unit_impulse(3);
    const auto gr = metric::loss_and_grads(net, h, delta);
    const double step = 1e-6;
    auto loss = [&](const metric::MetricNet& m, const Vector& x) { return metric::loss_and_grads(m, x, delta).loss; };
    for (auto* block : {&net.w1, &net.w2}) {
      const auto& ablock = block == &net.w1 ? gr.params.w1 : gr.params.w2;
      for (Eigen::Index i = 0; i < block->size(); ++i) {
        const double keep = block->data()[i];
        block->data()[i] = keep + step;
        const double up = loss(net, h);
        block->data()[i] = keep - step;
        const double down = loss(net, h);
        block->data()[i] = keep;
        mlp_worst = std::max(mlp_worst, rel((up - down) / (2 * step), ablock.data()[i], 1e-6));
      }
    }
    for (auto* block : {&net.b1, &net.b2}) {
      const auto& ablock = block == &net.b1 ? gr.params.b1 : gr.params.b2;
      for (Eigen::Index i = 0; i < block->size(); ++i) {
        const double keep = (*block)(i);
        (*block)(i) = keep + step;
        const double up = loss(net, h);
        (*block)(i) = keep - step;
        const double down = loss(net, h);
        (*block)(i) = keep;
        mlp_worst = std::max(mlp_worst, rel((up - down) / (2 * step), ablock(i), 1e-6));
      }
    }
    for (int i = 0; i < 9; ++i) {
      Vector a = h, b = h;
      a(i) += step;
      b(i) -= step;
      mlp_worst = std::max(mlp_worst, rel((loss(net, a) - loss(net, b)) / (2 * step), gr.input(i), 1e-6));
    }
  }

  double wiener_worst = 0;
  for (int inst = 0; inst < kGradInstances; ++inst) {
    e2e::Batch b;
    for (int s = 0; s < 2; ++s) {
      Grid x(12, 12), e(12, 12);
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        x.data()[i] = u(rng);
        e.data()[i] = 0.02 * n(rng);
      }
      b.scenes.push_back(x);
      b.noise.push_back(e);
    }
    Grid k(5, 5);
    for (Eigen::Index i = 0; i < k.size(); ++i) k.data()[i] = 0.1 + u(rng);
    k /= k.sum();
    const e2e::RecoveryParams rp{std::log(1e-3 + 1e-2 * u(rng))};
    const auto gr = e2e::wiener_layer_grads(b, k, rp);
    const double scale = gr.grad_psf.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < k.size(); ++i) {
      Grid a = k, c = k;
      a.data()[i] += 1e-6;
      c.data()[i] -= 1e-6;
      const double fd = (e2e::wiener_layer_grads(b, a, rp).loss - e2e::wiener_layer_grads(b, c, rp).loss) / 2e-6;
      wiener_worst = std::max(wiener_worst, rel(fd, gr.grad_psf.data()[i], 1e-3 * scale));
    }
    const double fd = (e2e::wiener_layer_grads(b, k, {rp.log_sigma2 + 1e-6}).loss -
                       e2e::wiener_layer_grads(b, k, {rp.log_sigma2 - 1e-6}).loss) / 2e-6;
    wiener_worst = std::max(wiener_worst, rel(fd, gr.grad_log_sigma2, 1e-8));
  }

  double outer_worst = 0;
  e2e::E2EConfig cfg;
  cfg.side = 16;
  cfg.num_coeffs = 6;
  cfg.hidden = 16;
  cfg.gamma = 0.5;
  const auto prob = e2e::Problem::make(cfg);
  const auto batch = e2e::make_batch(cfg);
  for (int inst = 0; inst < kGradInstances; ++inst) {
    Vector theta = prob.initial_theta(cfg);
    for (Eigen::Index l = 0; l < theta.size(); ++l) theta(l) += 0.5 * n(rng);
    metric::TrainConfig tc;
    tc.hidden = 16;
    tc.epochs = 30;
    tc.seed = 500 + inst;
    const auto net = metric::train_metric(e2e::mean_psf(prob, theta), tc).net;
    const e2e::RecoveryParams rp{-6.0 + 0.1 * n(rng)};
    const auto s = e2e::outer_objective(prob, theta, rp, &net, batch, cfg);
    Vector fd(theta.size());
    for (Eigen::Index l = 0; l < theta.size(); ++l) {
      Vector a = theta, c = theta;
      a(l) += 1e-6;
      c(l) -= 1e-6;
      fd(l) = (e2e::outer_objective(prob, a, rp, &net, batch, cfg).outer_loss -
               e2e::outer_objective(prob, c, rp, &net, batch, cfg).outer_loss) / 2e-6;
    }
    outer_worst = std::max(outer_worst, (fd - s.grad_theta).norm() / fd.norm());
  }

  const double secs = since(t0);
  v.detail << "worst relative error mlp " << g(mlp_worst) << " wiener " << g(wiener_worst) << " outer "
           << g(outer_worst) << " over " << kGradInstances << " instances each, time " << g(secs) << "s";
  v.require(mlp_worst <= kMlpGradTol, "mlp gradients");
  v.require(wiener_worst <= kWienerGradTol, "wiener layer gradients");
  v.require(outer_worst <= kOuterGradTol, "outer gradient");
  v.require(secs <= kGradSeconds, "runtime");
  return v;
}

// 8
Verdict oracle_equivalence() {
  Verdict v;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  double kappa_worst = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const int side = 4 + inst % 13;  // 4..16
    const int ks = 1 + 2 * static_cast<int>(u(rng) * 2);
    Grid k(ks, ks);
    for (Eigen::Index i = 0; i < k.size(); ++i) k.data()[i] = 0.05 + u(rng);
    const double a = condition_number_circulant(k, side, side).kappa;
    const double b = condition_number_dense(make_operator(k, side, side)).kappa;
    kappa_worst = std::max(kappa_worst, std::abs(a - b) / b);
  }
  double conv_worst = 0, adjoint_worst = 0;
  for (int side = 4; side <= 8; ++side)
    for (Boundary bd : {Boundary::circular, Boundary::zero_pad}) {
      Grid k(3, 3), x(side, side), z(side, side);
      for (auto* m : {&k, &x, &z})
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = n(rng);
      const auto op = make_operator(k, side, side, bd);
      const Vector dense = build_dense_matrix(op) * flatten(x);
      conv_worst = std::max(conv_worst, (dense - flatten(convolve(x, op))).cwiseAbs().maxCoeff());
      const double lhs = (convolve(x, op).array() * z.array()).sum();
      const double rhs = (x.array() * correlate(z, op).array()).sum();
      adjoint_worst = std::max(adjoint_worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
  v.detail << "kappa rel " << g(kappa_worst) << " conv abs " << g(conv_worst) << " adjoint " << g(adjoint_worst);
  v.require(kappa_worst <= kKappaOracleTol, "circulant vs dense kappa");
  v.require(conv_worst <= kConvOracleTol, "fft vs dense convolution");
  v.require(adjoint_worst <= kAdjointTol, "adjoint");
  return v;
}

std::vector<std::pair<std::string, std::string>> non_timing_files(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).string();
    if (rel.find("timing") != std::string::npos) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out.emplace_back(rel, ss.str());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// 9
Verdict determinism(const fs::path& scratch) {
  Verdict v;
  const std::vector<std::vector<std::string>> runs{
      {"gen-psf", "--psf", "diffuser", "--side", "16"},
      {"metric", "--psf", "gauss", "--sigma", "2", "--side", "16", "--epochs", "50", "--hidden", "32"},
      {"metric", "--psf", "motion", "--side", "16", "--snr-db", "30", "--resample-noise", "true", "--epochs", "30"},
      {"cond", "--psf", "box", "--side", "8"},
      {"deconv", "--psf", "gauss", "--side", "9", "--image-side", "32", "--solver", "tv"},
      {"deconv", "--psf", "gauss", "--side", "9", "--image-side", "32", "--solver", "rl"},
      {"sweep-gaussian", "--side", "8", "--image-side", "16", "--epochs", "20", "--hidden", "16"},
      {"bench-time", "--sides", "4,8", "--epochs", "5", "--hidden", "8"},
      {"suite", "--side", "8", "--image-side", "16", "--epochs", "20", "--hidden", "16", "--motion-spread", "5"},
      {"correlate", "--side", "8", "--image-side", "16", "--epochs", "20", "--hidden", "16", "--motion-spread", "5"},
      {"e2e", "--side", "16", "--num-coeffs", "6", "--outer-epochs", "3", "--inner-epochs", "5", "--epochs", "20",
       "--hidden", "16", "--gamma", "1"},
      {"gamma-sweep", "--side", "16", "--num-coeffs", "6", "--outer-epochs", "2", "--inner-epochs", "5", "--epochs",
       "10", "--hidden", "16", "--gammas", "0,1"},
      {"render-psf", "--side", "32", "--preset", "spiral"},
  };
  int compared = 0;
  for (size_t i = 0; i < runs.size(); ++i) {
    std::vector<std::vector<std::pair<std::string, std::string>>> outputs;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = scratch / ("run" + std::to_string(i)) / std::to_string(rep);
      fs::remove_all(dir);
      auto args = runs[i];
      args.insert(args.end(), {"--seed", "3", "--threads", "1", "--out", dir.string()});
      std::ostringstream out, err;
      const int code = cli::dispatch(args, out, err);
      v.require(code == cli::kExitOk, runs[i][0] + " exit " + std::to_string(code) + " " + err.str());
      outputs.push_back(non_timing_files(dir));
    }
    v.require(!outputs[0].empty(), runs[i][0] + " wrote no files");
    v.require(outputs[0] == outputs[1], runs[i][0] + " outputs differ");
    compared += static_cast<int>(outputs[0].size());
  }
  v.detail << runs.size() << " commands, " << compared << " files compared byte for byte";
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> only;
  std::string scratch = (fs::temp_directory_path() / "psfinv_acceptance").string();
  app.add_option("--only", only, "criteria to run (default all)");
  std::string log;
  app.add_option("--scratch", scratch, "directory for determinism reruns");
  app.add_option("--log", log, "also append result lines to this file");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"impulse optimality", impulse_optimality},
      {"gaussian monotonicity", gaussian_monotonicity},
      {"timing scaling", timing_scaling},
      {"suite ordering", suite_ordering},
      {"correlation dominance", correlation_dominance},
      {"regularized e2e direction", regularized_e2e},
      {"gradient suite", gradient_suite},
      {"oracle equivalence", oracle_equivalence},
      {"determinism", [&] { return determinism(scratch); }},
  };
  bool all = true;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "exception: " << e.what();
    }
    all = all && v.pass;
    char head[128];
    std::snprintf(head, sizeof head, "criterion %d %s: %s", id, criteria[i].first.c_str(), v.pass ? "PASS" : "FAIL");
    const std::string line = std::string(head) + " (" + v.detail.str() + ")";
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    if (!log.empty()) std::ofstream(log, std::ios::app) << line << '\n';
  }
  return all ? 0 : 1;
}
