#include "psfinv/bench.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <sstream>

#include "psfinv/conv.hpp"
#include "psfinv/errors.hpp"
#include "psfinv/image_io.hpp"
#include "psfinv/optics.hpp"
#include "psfinv/parallel.hpp"
#include "psfinv/report.hpp"

namespace psfinv::bench {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double elapsed(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::vector<Grid> scene_set(const BenchConfig& cfg) {
  auto scenes = image::synthetic_scenes(cfg.image_side, cfg.seed).scenes;
  if (!cfg.scene_dir.empty()) {
    const auto extra = image::ingest_images(cfg.scene_dir, cfg.image_side, false, cfg.seed, 4);
    scenes.insert(scenes.end(), extra.scenes.begin(), extra.scenes.end());
  }
  return scenes;
}

Grid held_out_scene(const BenchConfig& cfg) {
  return 0.5 * image::smooth_random_scene(cfg.image_side, cfg.seed + 1000) +
         0.5 * image::piecewise_constant_scene(cfg.image_side, cfg.seed + 1000);
}

double tune_wiener_sigma2(const std::vector<Psf>& psfs, const BenchConfig& cfg, const NoiseSpec& noise) {
  if (cfg.wiener_grid.empty()) throw ConfigError("bench: empty Wiener sigma2 grid");
  const Grid x = held_out_scene(cfg);
  std::vector<Grid> ys;
  for (const auto& p : psfs) ys.push_back(degrade(x, p, noise));
  double best = kInf, best_s2 = cfg.wiener_grid.front();
  for (double s2 : cfg.wiener_grid) {
    double total = 0;
    for (std::size_t i = 0; i < psfs.size(); ++i) total += mse(wiener_deconvolve(ys[i], psfs[i], {s2}), x);
    if (total < best) best = total, best_s2 = s2;
  }
  return best_s2;
}

SolverErrors measure_solvers(const Psf& psf, const std::vector<Grid>& scenes, const NoiseSpec& noise,
                             double wiener_sigma2, const BenchConfig& cfg) {
  SolverErrors e;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    NoiseSpec n = noise;
    n.seed = noise.seed + i;
    const Grid y = degrade(scenes[i], psf, n);
    e.wiener += mse(wiener_deconvolve(y, psf, {wiener_sigma2}), scenes[i]);
    e.tv += mse(tv_deconvolve(y, psf, cfg.tv), scenes[i]);
    e.rl += mse(richardson_lucy(y.cwiseMax(0.0), psf, cfg.rl_iters), scenes[i]);
  }
  const double s = static_cast<double>(scenes.size());
  e.wiener /= s;
  e.tv /= s;
  e.rl /= s;
  return e;
}

std::string digest(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string describe(const BenchConfig& cfg) {
  std::ostringstream o;
  o << "side=" << cfg.side << "\nimage_side=" << cfg.image_side << "\nmetric.lr=" << report::num(cfg.metric.lr)
    << "\nmetric.epochs=" << cfg.metric.epochs << "\nmetric.hidden=" << cfg.metric.hidden
    << "\nmetric.seed=" << cfg.metric.seed << "\nmetric.loss=" << (cfg.metric.loss == metric::TrainLoss::norm ? "norm" : "mean_squared")
    << "\nmeasure_snr_db=" << report::num(cfg.measure_snr_db) << "\nnoise_seed=" << cfg.noise_seed
    << "\ntv.rho=" << report::num(cfg.tv.rho) << "\ntv.iters=" << cfg.tv.iters << "\ntv.step=" << report::num(cfg.tv.step)
    << "\ntv.inner_iters=" << cfg.tv.inner_iters << "\nrl_iters=" << cfg.rl_iters << "\nwiener_grid=";
  for (double v : cfg.wiener_grid) o << report::num(v) << ';';
  o << "\nscene_dir=" << cfg.scene_dir.string() << "\nseed=" << cfg.seed << "\ndefocus=" << report::num(cfg.defocus)
    << "\nmotion_focused=" << cfg.motion_focused << "\nmotion_spread=" << cfg.motion_spread << '\n';
  return o.str();
}

ExperimentReport evaluate_psfs(const std::vector<Psf>& psfs, const BenchConfig& cfg) {
  if (psfs.empty()) throw InvalidInput("bench: no PSFs");
  const auto scenes = scene_set(cfg);
  const NoiseSpec noise{cfg.measure_snr_db, cfg.noise_seed};
  ExperimentReport r;
  r.psfs = psfs;
  r.seed = cfg.seed;
  r.config_digest = digest(describe(cfg));
  r.timestamp = utc_now();
  r.wiener_sigma2 = tune_wiener_sigma2(psfs, cfg, noise);
  r.rows.resize(psfs.size());
  parallel_for(psfs.size(), cfg.threads, [&](std::size_t i) {
    const Psf& p = psfs[i];
    ReportRow& row = r.rows[i];
    row.psf_id = p.id();
    auto t0 = Clock::now();
    row.metric = metric::train_metric(p, cfg.metric).value;
    row.wall_time_metric_s = elapsed(t0);
    t0 = Clock::now();
    const auto s = condition_number_circulant(p, cfg.image_side);
    row.wall_time_kappa_s = elapsed(t0);
    row.kappa = s.kappa;
    row.kappa_hth = s.kappa_hth;
    const auto e = measure_solvers(p, scenes, noise, r.wiener_sigma2, cfg);
    row.wiener_mse = e.wiener;
    row.tv_mse = e.tv;
    row.rl_mse = e.rl;
  });
  return r;
}

std::vector<Psf> suite_corpus(const BenchConfig& cfg) {
  const auto p = optics::OpticalParams::desk_default(cfg.side);
  const int w = p.design_index();
  auto render = [&](const Grid& phase, const std::string& id) {
    return optics::render_psf(optics::phase_to_height(phase, p, w), p, w, id);
  };
  const double spread_focal = p.z * (1.0 + cfg.defocus);
  const Grid lens = optics::fresnel_lens_phase(p, p.z, w);
  const Grid lens_spread = optics::fresnel_lens_phase(p, spread_focal, w);
  const Grid spiral = optics::spiral_phase(1, cfg.side);
  return {impulse_psf(cfg.side),
          render(lens, "fresnel_focused"),
          render(lens_spread, "fresnel_spread"),
          render(optics::wrap_phase(lens + spiral), "spiral_focused"),
          render(optics::wrap_phase(lens_spread + spiral), "spiral_spread"),
          motion_blur_psf(cfg.side, cfg.motion_focused, 30.0).with_id("motion_focused"),
          motion_blur_psf(cfg.side, cfg.motion_spread, 30.0).with_id("motion_spread"),
          diffuser_psf(cfg.side, cfg.seed).with_id("diffuser")};
}

ExperimentReport psf_suite_report(const BenchConfig& cfg) { return evaluate_psfs(suite_corpus(cfg), cfg); }

ExperimentReport gaussian_sweep(const std::vector<double>& sigmas, const BenchConfig& cfg) {
  if (sigmas.size() < 3) throw InvalidParameter("gaussian_sweep: need at least 3 sigmas");
  std::vector<Psf> psfs;
  for (double s : sigmas) psfs.push_back(gaussian_psf(cfg.side, s));
  return evaluate_psfs(psfs, cfg);
}

std::vector<TimingRow> timing_benchmark(const std::vector<int>& sides, const BenchConfig& cfg, int reps) {
  if (reps < 3) throw InvalidParameter("timing_benchmark: need at least 3 repetitions");
  if (sides.empty() || !std::is_sorted(sides.begin(), sides.end()))
    throw InvalidParameter("timing_benchmark: sides must be non-empty and ascending");
  const long largest = static_cast<long>(sides.back()) * sides.back();
  if (largest > kDenseLimit)
    throw SizeLimitError("timing_benchmark: side " + std::to_string(sides.back()) +
                         " exceeds the dense guardrail of n <= " + std::to_string(kDenseLimit));
  std::vector<TimingRow> rows;
  for (int side : sides) {
    TimingRow row;
    row.side = side;
    row.k = static_cast<long>(side) * side;
    const Psf p = gaussian_psf(side, 2.0);
    const auto op = make_operator(p, side);
    for (int r = 0; r < reps; ++r) {
      auto t0 = Clock::now();
      metric::train_metric(p, cfg.metric);
      row.metric_runs.push_back(elapsed(t0));
      t0 = Clock::now();
      condition_number_dense(op);
      row.kappa_runs.push_back(elapsed(t0));
    }
    row.metric_s = stats::median(row.metric_runs);
    row.kappa_s = stats::median(row.kappa_runs);
    rows.push_back(std::move(row));
  }
  return rows;
}

CorrelationStudy correlation_study(const ExperimentReport& report, const std::optional<NoiseSpec>& noise,
                                   const BenchConfig& cfg) {
  if (report.rows.size() < 5) throw InvalidInput("correlation_study: need at least 5 report rows");
  std::vector<double> metric, logk, wiener, tv, rl;
  CorrelationStudy c;
  c.noise = noise;
  c.wiener_sigma2 = report.wiener_sigma2;
  std::vector<SolverErrors> errs(report.rows.size());
  if (noise) {
    if (report.psfs.size() != report.rows.size()) throw InvalidInput("correlation_study: report carries no PSFs");
    const auto scenes = scene_set(cfg);
    c.wiener_sigma2 = tune_wiener_sigma2(report.psfs, cfg, *noise);
    parallel_for(report.rows.size(), cfg.threads,
                 [&](std::size_t i) { errs[i] = measure_solvers(report.psfs[i], scenes, *noise, c.wiener_sigma2, cfg); });
  } else {
    for (std::size_t i = 0; i < report.rows.size(); ++i)
      errs[i] = {report.rows[i].wiener_mse, report.rows[i].tv_mse, report.rows[i].rl_mse};
  }
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& row = report.rows[i];
    if (!std::isfinite(row.kappa))
      throw UndefinedCorrelation("correlation_study: kappa of " + row.psf_id + " is infinite (singular operator)");
    metric.push_back(row.metric);
    logk.push_back(std::log10(row.kappa));
    wiener.push_back(errs[i].wiener);
    tv.push_back(errs[i].tv);
    rl.push_back(errs[i].rl);
  }
  const std::vector<std::string> labels = {"metric", "log10_kappa", "wiener_mse", "tv_mse", "rl_mse"};
  const std::vector<std::vector<double>> cols = {metric, logk, wiener, tv, rl};
  c.pearson = stats::correlation_matrix(labels, cols, stats::Coefficient::pearson);
  c.spearman = stats::correlation_matrix(labels, cols, stats::Coefficient::spearman);
  return c;
}

void write_report(const ExperimentReport& r, const fs::path& dir, const std::string& stem) {
  report::Table t{{"psf_id", "metric", "kappa", "kappa_hth", "wiener_mse", "tv_mse", "rl_mse"}, {}};
  report::Table timing{{"psf_id", "wall_time_metric_s", "wall_time_kappa_s"}, {}};
  nlohmann::json j;
  j["meta"] = {{"seed", r.seed}, {"config_digest", r.config_digest}, {"wiener_sigma2", r.wiener_sigma2}};
  j["rows"] = nlohmann::json::array();
  for (const auto& row : r.rows) {
    t.rows.push_back({row.psf_id, report::num(row.metric), report::num(row.kappa), report::num(row.kappa_hth),
                      report::num(row.wiener_mse), report::num(row.tv_mse), report::num(row.rl_mse)});
    timing.rows.push_back({row.psf_id, report::seconds(row.wall_time_metric_s), report::seconds(row.wall_time_kappa_s)});
    j["rows"].push_back({{"psf_id", row.psf_id},
                         {"metric", report::json_num(row.metric)},
                         {"kappa", report::json_num(row.kappa)},
                         {"kappa_hth", report::json_num(row.kappa_hth)},
                         {"wiener_mse", report::json_num(row.wiener_mse)},
                         {"tv_mse", report::json_num(row.tv_mse)},
                         {"rl_mse", report::json_num(row.rl_mse)}});
  }
  report::write_csv(t, dir / (stem + ".csv"));
  report::write_json(j, dir / (stem + ".json"));
  report::write_csv(timing, dir / (stem + "_timing.csv"));
  report::write_json({{"timestamp", r.timestamp}, {"config_digest", r.config_digest}}, dir / (stem + "_timing.json"));
}

void write_timing(const std::vector<TimingRow>& rows, const fs::path& dir) {
  report::Table t{{"side", "k", "metric_median_s", "kappa_median_s"}, {}};
  std::vector<double> ks, mt, kt;
  for (const auto& r : rows) {
    t.rows.push_back({std::to_string(r.side), std::to_string(r.k), report::seconds(r.metric_s), report::seconds(r.kappa_s)});
    ks.push_back(static_cast<double>(r.k));
    mt.push_back(r.metric_s);
    kt.push_back(r.kappa_s);
  }
  report::write_csv(t, dir / "timing.csv");
  report::write_text(report::svg_line_chart("Running time", "k", ks, {{"metric", mt}, {"dense kappa", kt}}, true),
                     dir / "timing.svg");
}

void write_correlation(const CorrelationStudy& c, const fs::path& dir, const std::string& stem) {
  nlohmann::json j;
  j["pearson"] = report::to_json(c.pearson);
  j["spearman"] = report::to_json(c.spearman);
  j["wiener_sigma2"] = c.wiener_sigma2;
  j["snr_db"] = c.noise ? report::json_num(c.noise->snr_db) : nlohmann::json("clean-report");
  report::write_json(j, dir / (stem + ".json"));
  report::write_text(report::svg_heat_table("Pearson correlation", c.pearson), dir / (stem + ".svg"));
}

}  // namespace psfinv::bench
