#include "psfinv/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "psfinv/bench.hpp"
#include "psfinv/conv.hpp"
#include "psfinv/deconv.hpp"
#include "psfinv/e2e.hpp"
#include "psfinv/errors.hpp"
#include "psfinv/image_io.hpp"
#include "psfinv/metric_net.hpp"
#include "psfinv/optics.hpp"
#include "psfinv/report.hpp"

namespace psfinv::cli {

namespace fs = std::filesystem;

namespace {

struct Context {
  RunConfig cfg;
  std::ostream& out;
  std::ostream& err;
  int threads = 1;

  bool has_out() const { return cfg.has("out"); }
  fs::path out_dir() const { return fs::path(cfg.get("out")); }
  // Creates the output directory and writes the resolved-config snapshot.
  void prepare() const {
    if (!has_out()) return;
    fs::create_directories(out_dir());
    cfg.write_snapshot(out_dir() / "resolved_config.txt");
  }
};

std::string kappa_text(double v) {
  if (!std::isfinite(v)) return report::num(v);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  std::string s = buf;
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

metric::TrainConfig train_config(const RunConfig& cfg) {
  metric::TrainConfig t;
  t.lr = cfg.get_double("lr");
  t.epochs = static_cast<int>(cfg.get_int("epochs"));
  t.hidden = static_cast<int>(cfg.get_int("hidden"));
  t.seed = cfg.get_uint("seed");
  const std::string loss = cfg.get("loss");
  if (loss == "norm")
    t.loss = metric::TrainLoss::norm;
  else if (loss == "mean_squared")
    t.loss = metric::TrainLoss::mean_squared;
  else
    throw ConfigError("loss must be norm or mean_squared");
  t.resample_noise = cfg.get_bool("resample_noise");
  t.validate();
  return t;
}

bench::BenchConfig bench_config(const Context& c) {
  const RunConfig& cfg = c.cfg;
  bench::BenchConfig b;
  b.side = static_cast<int>(cfg.get_int("side"));
  b.image_side = static_cast<int>(cfg.get_int("image_side"));
  b.metric = train_config(cfg);
  b.measure_snr_db = cfg.get_double("measure_snr_db");
  b.noise_seed = cfg.get_uint("noise_seed");
  b.tv.rho = cfg.get_double("tv_rho");
  b.tv.iters = static_cast<int>(cfg.get_int("tv_iters"));
  b.rl_iters = static_cast<int>(cfg.get_int("rl_iters"));
  b.scene_dir = cfg.get("scene_dir");
  b.seed = cfg.get_uint("seed");
  b.defocus = cfg.get_double("defocus");
  b.motion_focused = static_cast<int>(cfg.get_int("motion_focused"));
  b.motion_spread = static_cast<int>(cfg.get_int("motion_spread"));
  b.threads = c.threads;
  return b;
}

e2e::E2EConfig e2e_config(const RunConfig& cfg) {
  e2e::E2EConfig e;
  e.gamma = cfg.get_double("gamma");
  e.outer_epochs = static_cast<int>(cfg.get_int("outer_epochs"));
  e.inner_epochs = static_cast<int>(cfg.get_int("inner_epochs"));
  e.initial_inner_epochs = static_cast<int>(cfg.get_int("epochs"));
  e.outer_lr = cfg.get_double("outer_lr");
  e.inner_lr = cfg.get_double("inner_lr");
  e.num_coeffs = static_cast<int>(cfg.get_int("num_coeffs"));
  e.side = static_cast<int>(cfg.get_int("side"));
  e.hidden = static_cast<int>(cfg.get_int("hidden"));
  e.warm_start = cfg.get_bool("warm_start");
  e.seed = cfg.get_uint("seed");
  e.noise_std = cfg.get_double("noise_std");
  e.init_focus = cfg.get_double("init_focus");
  e.dataset_dir = cfg.get("scene_dir");
  e.synthetic = cfg.get_bool("synthetic");
  e.validate();
  return e;
}

optics::OpticalParams optics_for(const RunConfig& cfg, int& wavelength) {
  auto p = optics::OpticalParams::desk_default(static_cast<int>(cfg.get_int("side")));
  const long w = cfg.get_int("wavelength_index");
  if (w >= static_cast<long>(p.wavelengths.size())) throw ConfigError("wavelength_index out of range");
  wavelength = w < 0 ? p.design_index() : static_cast<int>(w);
  return p;
}

Grid preset_phase(const RunConfig& cfg, const optics::OpticalParams& p, int w) {
  const std::string preset = cfg.get("preset");
  const int side = p.aperture_side;
  const double focal = p.z * cfg.get_double("focal_scale");
  if (preset == "flat") return Grid::Zero(side, side);
  if (preset == "fresnel") return optics::fresnel_lens_phase(p, focal, w);
  if (preset == "spiral")
    return optics::wrap_phase(optics::fresnel_lens_phase(p, focal, w) +
                              optics::spiral_phase(static_cast<int>(cfg.get_int("charge")), side));
  if (preset == "random") return optics::random_phase(side, cfg.get_uint("seed"));
  throw ConfigError("unknown preset '" + preset + "' (expected flat, fresnel, spiral, random or coeffs)");
}

}  // namespace

Psf psf_from_config(const RunConfig& cfg) {
  const std::string kind = cfg.get("psf");
  const int side = static_cast<int>(cfg.get_int("side"));
  Psf p = impulse_psf(1);
  if (kind == "impulse") {
    p = impulse_psf(side);
  } else if (kind == "gauss" || kind == "gaussian") {
    p = gaussian_psf(side, cfg.get_double("sigma"));
  } else if (kind == "motion") {
    p = motion_blur_psf(side, static_cast<int>(cfg.get_int("length")), cfg.get_double("angle"));
  } else if (kind == "diffuser") {
    p = diffuser_psf(side, cfg.get_uint("seed"));
  } else if (kind == "box") {
    p = box_psf(side, static_cast<int>(cfg.get_int("width")));
  } else if (kind == "fresnel" || kind == "spiral") {
    RunConfig c = cfg;
    c.set("preset", kind);
    int w = 0;
    const auto params = optics_for(c, w);
    p = optics::render_psf(optics::phase_to_height(preset_phase(c, params, w), params, w), params, w, kind);
  } else if (kind == "file") {
    if (!cfg.has("input")) throw ConfigError("psf=file needs --input");
    const fs::path in = cfg.get("input");
    p = in.extension() == ".txt" ? read_psf_text(in, in.stem().string()) : read_psf_raster(in, in.stem().string());
  } else {
    throw ConfigError("unknown psf kind '" + kind + "'");
  }
  const double snr = cfg.get_double("snr_db");
  if (!(snr == kInf)) p = add_noise(p, NoiseSpec{snr, cfg.get_uint("noise_seed")});
  return p;
}

namespace {

int cmd_gen_psf(Context& c) {
  const Psf p = psf_from_config(c.cfg);
  c.prepare();
  if (c.has_out()) {
    write_psf_text(p, c.out_dir() / "psf.txt");
    write_psf_raster(p, c.out_dir() / "psf.psf1");
    image::save_pgm(image::normalize_range(p.data()), c.out_dir() / "psf.pgm");
  }
  c.out << "psf " << p.id() << " side " << p.side() << " entropy " << report::num(entropy(p)) << '\n';
  return kExitOk;
}

int cmd_metric(Context& c) {
  const Psf p = psf_from_config(c.cfg);
  const auto tc = train_config(c.cfg);
  const auto r = metric::train_metric(p, tc);
  c.prepare();
  std::string curve;
  if (c.has_out()) {
    curve = "loss_curve.csv";
    metric::write_loss_curve_csv(r.loss_curve, c.out_dir() / curve);
    metric::save_checkpoint(r.net, c.out_dir() / "metric_net.bin");
    report::write_json(metric::result_json(r, p.id(), tc, curve), c.out_dir() / "metric.json");
  }
  c.out << "metric " << report::num(r.value) << " best_epoch " << r.best_epoch << '\n';
  return kExitOk;
}

int cmd_cond(Context& c) {
  const Psf p = psf_from_config(c.cfg);
  const int image_side = c.cfg.explicitly_set("image_side") ? static_cast<int>(c.cfg.get_int("image_side")) : p.side();
  std::string method = c.cfg.get("method");
  const auto op = make_operator(p, image_side);
  if (method == "auto") method = op.n() <= kDenseLimit ? "dense" : "circulant";
  SpectrumSummary s;
  if (method == "dense")
    s = condition_number_dense(op);
  else if (method == "circulant")
    s = condition_number_circulant(p, image_side);
  else
    throw ConfigError("method must be auto, dense or circulant");
  c.prepare();
  if (c.has_out()) {
    nlohmann::json j = s;
    j["psf_id"] = p.id();
    j["method"] = method;
    report::write_json(j, c.out_dir() / "cond.json");
  }
  c.out << "kappa " << kappa_text(s.kappa) << '\n' << "kappa_hth " << kappa_text(s.kappa_hth) << '\n';
  return kExitOk;
}

Grid load_scene(const RunConfig& cfg, int side) {
  if (cfg.has("image")) return image::center_crop(image::load_pnm(cfg.get("image")).luminance(), side);
  const auto set = image::synthetic_scenes(side, cfg.get_uint("seed"));
  for (std::size_t i = 0; i < set.names.size(); ++i)
    if (set.names[i] == cfg.get("scene")) return set.scenes[i];
  throw ConfigError("unknown scene '" + cfg.get("scene") + "'");
}

int cmd_deconv(Context& c) {
  RunConfig clean = c.cfg;
  clean.set("snr_db", "inf");
  const Psf p = psf_from_config(clean);
  const int side = static_cast<int>(c.cfg.get_int("image_side"));
  const Grid x = load_scene(c.cfg, side);
  const Grid y = degrade(x, p, NoiseSpec{c.cfg.get_double("measure_snr_db"), c.cfg.get_uint("noise_seed")});
  const std::string solver = c.cfg.get("solver");
  Grid xh;
  if (solver == "wiener") {
    xh = wiener_deconvolve(y, p, {c.cfg.get_double("sigma2")});
  } else if (solver == "tv") {
    TvConfig tv;
    tv.rho = c.cfg.get_double("tv_rho");
    tv.iters = static_cast<int>(c.cfg.get_int("tv_iters"));
    xh = tv_deconvolve(y, p, tv);
  } else if (solver == "rl") {
    xh = richardson_lucy(y.cwiseMax(0.0), p, static_cast<int>(c.cfg.get_int("rl_iters")));
  } else {
    throw ConfigError("solver must be wiener, tv or rl");
  }
  const double m = mse(xh, x), ps = psnr(xh, x, 1.0);
  c.prepare();
  if (c.has_out()) {
    image::save_pgm(x, c.out_dir() / "scene.pgm");
    image::save_pgm(y, c.out_dir() / "blurred.pgm");
    image::save_pgm(xh, c.out_dir() / "restored.pgm");
    report::write_json({{"psf_id", p.id()}, {"solver", solver}, {"mse", report::json_num(m)}, {"psnr", report::json_num(ps)}},
                       c.out_dir() / "deconv.json");
  }
  c.out << "solver " << solver << " mse " << report::num(m) << " psnr " << report::num(ps) << '\n';
  return kExitOk;
}

void print_rows(const bench::ExperimentReport& r, std::ostream& out) {
  out << "psf_id metric kappa wiener_mse tv_mse rl_mse\n";
  for (const auto& row : r.rows)
    out << row.psf_id << ' ' << report::num(row.metric) << ' ' << report::num(row.kappa) << ' '
        << report::num(row.wiener_mse) << ' ' << report::num(row.tv_mse) << ' ' << report::num(row.rl_mse) << '\n';
}

int cmd_sweep(Context& c) {
  const auto b = bench_config(c);
  const auto sigmas = c.cfg.get_doubles("sigmas");
  const auto r = bench::gaussian_sweep(sigmas, b);
  c.prepare();
  if (c.has_out()) {
    bench::write_report(r, c.out_dir(), "sweep");
    std::vector<double> m, w;
    for (const auto& row : r.rows) m.push_back(row.metric), w.push_back(row.wiener_mse);
    report::write_text(report::svg_line_chart("Gaussian sweep", "sigma", sigmas, {{"metric", m}, {"wiener mse", w}}, true),
                       c.out_dir() / "sweep.svg");
  }
  print_rows(r, c.out);
  return kExitOk;
}

int cmd_bench_time(Context& c) {
  const auto b = bench_config(c);
  const auto rows = bench::timing_benchmark(c.cfg.get_ints("sides"), b, static_cast<int>(c.cfg.get_int("reps")));
  c.prepare();
  if (c.has_out()) bench::write_timing(rows, c.out_dir());
  c.out << "k metric_s kappa_s\n";
  for (const auto& r : rows) c.out << r.k << ' ' << report::seconds(r.metric_s) << ' ' << report::seconds(r.kappa_s) << '\n';
  return kExitOk;
}

int cmd_suite(Context& c) {
  const auto r = bench::psf_suite_report(bench_config(c));
  c.prepare();
  if (c.has_out()) bench::write_report(r, c.out_dir(), "suite");
  print_rows(r, c.out);
  return kExitOk;
}

int cmd_correlate(Context& c) {
  const auto b = bench_config(c);
  const auto r = bench::psf_suite_report(b);
  c.prepare();
  if (c.has_out()) bench::write_report(r, c.out_dir(), "suite");
  auto emit = [&](const bench::CorrelationStudy& s, const std::string& stem) {
    if (c.has_out()) bench::write_correlation(s, c.out_dir(), stem);
    const auto& v = s.pearson.values;
    c.out << stem << " pearson(metric,wiener) " << report::num(v[0][2]) << " pearson(log10_kappa,wiener) "
          << report::num(v[1][2]) << '\n';
  };
  emit(bench::correlation_study(r, std::nullopt, b), "corr_base");
  for (double snr : c.cfg.get_doubles("snrs"))
    emit(bench::correlation_study(r, NoiseSpec{snr, b.noise_seed + 100}, b), "corr_snr" + report::num(snr));
  return kExitOk;
}

int cmd_e2e(Context& c) {
  const auto e = e2e_config(c.cfg);
  const auto r = e2e::e2e_optimize(e);
  c.prepare();
  if (c.has_out()) {
    e2e::write_history_csv(r.history, c.out_dir() / "history.csv");
    optics::write_coeffs_csv(r.coeffs, c.out_dir() / "design_coeffs.csv");
    write_psf_text(r.final_psf, c.out_dir() / "final_psf.txt");
    metric::save_checkpoint(r.net, c.out_dir() / "metric_net.bin");
    report::write_json({{"gamma", e.gamma},
                        {"final_psnr", report::json_num(r.final_psnr)},
                        {"final_metric", report::json_num(r.final_metric)},
                        {"final_kappa", report::json_num(r.final_kappa)},
                        {"log_sigma2", r.rp.log_sigma2}},
                       c.out_dir() / "e2e.json");
    report::write_json({{"inner_training_s", r.inner_seconds}}, c.out_dir() / "e2e_timing.json");
  }
  c.out << "gamma " << report::num(e.gamma) << " psnr " << report::num(r.final_psnr) << " metric "
        << report::num(r.final_metric) << " kappa " << report::num(r.final_kappa) << '\n';
  return kExitOk;
}

int cmd_gamma_sweep(Context& c) {
  const auto e = e2e_config(c.cfg);
  const auto rep = e2e::gamma_sweep(e, c.cfg.get_doubles("gammas"));
  c.prepare();
  if (c.has_out()) {
    report::write_json(e2e::to_json(rep), c.out_dir() / "gamma_sweep.json");
    report::Table t{{"gamma", "psnr", "metric", "kappa"}, {}};
    std::vector<std::string> cats;
    std::vector<double> psnrs;
    for (const auto& r : rep.rows) {
      t.rows.push_back({report::num(r.gamma), report::num(r.psnr), report::num(r.metric), report::num(r.kappa)});
      cats.push_back("gamma=" + report::num(r.gamma));
      psnrs.push_back(r.psnr);
    }
    report::write_csv(t, c.out_dir() / "gamma_sweep.csv");
    report::write_text(report::svg_bar_chart("Final PSNR (dB) per gamma", cats, psnrs), c.out_dir() / "gamma_sweep.svg");
  }
  c.out << "gamma psnr metric kappa\n";
  for (const auto& r : rep.rows)
    c.out << report::num(r.gamma) << ' ' << report::num(r.psnr) << ' ' << report::num(r.metric) << ' '
          << report::num(r.kappa) << '\n';
  return kExitOk;
}

int cmd_render_psf(Context& c) {
  int w = 0;
  const auto p = optics_for(c.cfg, w);
  Grid phi;
  std::optional<Vector> coeffs;
  if (c.cfg.get("preset") == "coeffs") {
    if (!c.cfg.has("coeffs")) throw ConfigError("preset=coeffs needs --coeffs FILE");
    coeffs = optics::read_coeffs_csv(c.cfg.get("coeffs"));
    phi = optics::make_heightmap(*coeffs, optics::zernike_basis(static_cast<int>(coeffs->size()), p.aperture_side)).phi;
  } else {
    phi = optics::phase_to_height(preset_phase(c.cfg, p, w), p, w);
  }
  const Psf psf = optics::render_psf(phi, p, w, c.cfg.get("preset"));
  c.prepare();
  if (c.has_out()) {
    write_psf_text(psf, c.out_dir() / "psf.txt");
    image::save_pgm(image::normalize_range(psf.data()), c.out_dir() / "psf.pgm");
    image::save_pgm(image::normalize_range(phi), c.out_dir() / "phi.pgm");
    if (coeffs) optics::write_coeffs_csv(*coeffs, c.out_dir() / "coeffs.csv");
  }
  c.out << "psf " << psf.id() << " wavelength_m " << report::num(p.wavelengths[w]) << " encircled_3x3 "
        << report::num(optics::encircled_energy(psf.data(), 1)) << '\n';
  return kExitOk;
}

struct Command {
  std::string name;
  std::string help;
  std::vector<std::string> keys;
  std::function<int(Context&)> run;
};

const std::vector<std::string> kPsfKeys = {"psf",    "side",  "sigma", "length",   "angle", "width",
                                           "input", "snr_db", "noise_seed", "defocus", "focal_scale", "charge", "wavelength_index"};
const std::vector<std::string> kTrainKeys = {"epochs", "hidden", "lr", "loss", "resample_noise"};
const std::vector<std::string> kBenchKeys = {"side",     "image_side",     "measure_snr_db", "noise_seed",   "tv_rho",
                                             "tv_iters", "rl_iters",       "scene_dir",      "defocus",      "motion_focused",
                                             "motion_spread"};
const std::vector<std::string> kE2EKeys = {"gamma",      "outer_epochs", "inner_epochs", "epochs",   "outer_lr",
                                           "inner_lr",   "num_coeffs",   "side",         "hidden",   "warm_start",
                                           "noise_std",  "init_focus",   "scene_dir",    "synthetic"};

std::vector<std::string> join(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts)
    for (const auto& k : p)
      if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  return out;
}

std::vector<Command> commands() {
  return {
      {"gen-psf", "Generate a PSF and save it in text and raster form", kPsfKeys, cmd_gen_psf},
      {"metric", "Train the invertibility metric on one PSF", join({kPsfKeys, kTrainKeys}), cmd_metric},
      {"cond", "Condition number of the convolution operator", join({kPsfKeys, {"image_side", "method"}}), cmd_cond},
      {"deconv", "Blur a scene and restore it with one solver",
       join({kPsfKeys, {"image_side", "image", "scene", "solver", "sigma2", "tv_rho", "tv_iters", "rl_iters", "measure_snr_db"}}),
       cmd_deconv},
      {"sweep-gaussian", "Metric, kappa and solver error over Gaussian widths", join({kBenchKeys, kTrainKeys, {"sigmas"}}),
       cmd_sweep},
      {"bench-time", "Running time of metric training versus dense SVD", join({kTrainKeys, {"sides", "reps"}}), cmd_bench_time},
      {"suite", "Mixed PSF suite report", join({kBenchKeys, kTrainKeys}), cmd_suite},
      {"correlate", "Correlation of metric and log condition number with solver error",
       join({kBenchKeys, kTrainKeys, {"snrs"}}), cmd_correlate},
      {"e2e", "Bi-level lens design with the metric as regularizer", kE2EKeys, cmd_e2e},
      {"gamma-sweep", "Lens design over several regularization weights", join({kE2EKeys, {"gammas"}}), cmd_gamma_sweep},
      {"render-psf", "Render a PSF from a phase preset or Zernike coefficients",
       {"side", "preset", "focal_scale", "charge", "coeffs", "wavelength_index"}, cmd_render_psf},
  };
}

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

int classify(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidParameter*>(&e) ||
      dynamic_cast<const InvalidDimension*>(&e) || dynamic_cast<const InvalidInput*>(&e) ||
      dynamic_cast<const SizeLimitError*>(&e))
    return kExitUsage;
  return kExitFailure;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learned PSF invertibility metric: training, baselines, benchmarks and lens design", "psfinv"};
  app.require_subcommand(1);
  std::map<std::string, std::string> flags;
  std::string config_path, profile, out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string chosen;
  const auto cmds = commands();
  for (const auto& cmd : cmds) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--profile", profile, "desk (default) or paper (slow)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "global seed");
    sub->add_option("--threads", threads, "worker threads (1 = sequential); falls back to PSFINV_THREADS");
    for (const auto& key : cmd.keys) sub->add_option(flag_name(key), flags[key], key);
    sub->callback([&chosen, name = cmd.name] { chosen = name; });
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (!args.empty() && e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << (args.empty() ? "" : std::string("error: ") + e.what() + "\n") << app.help();
    return kExitUsage;
  }

  try {
    Context c{RunConfig{}, out, err};
    for (const auto& [k, v] : flags)
      if (!v.empty()) c.cfg.set(k, v);
    auto* sub = app.get_subcommand(chosen);
    if (sub->count("--seed")) c.cfg.set("seed", std::to_string(seed));
    if (sub->count("--threads")) c.cfg.set("threads", std::to_string(threads));
    if (sub->count("--out")) c.cfg.set("out", out_dir);
    if (sub->count("--profile")) c.cfg.set("profile", profile);
    if (sub->count("--config")) {
      c.cfg.set("config", config_path);
      c.cfg.load_file(config_path);
    }
    c.cfg.apply_profile(c.cfg.get("profile"));
    c.threads = resolve_threads(c.cfg);
    for (const auto& cmd : cmds)
      if (cmd.name == chosen) return cmd.run(c);
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return classify(e);
  }
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace psfinv::cli
