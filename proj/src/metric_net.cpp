#include "psfinv/metric_net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <random>

#include "psfinv/errors.hpp"

namespace psfinv::metric {

ParamBlocks zeros_like(const MetricNet& net) {
  return ParamBlocks{Matrix::Zero(net.w1.rows(), net.w1.cols()), Vector::Zero(net.b1.size()),
                     Matrix::Zero(net.w2.rows(), net.w2.cols()), Vector::Zero(net.b2.size())};
}

AdamState AdamState::for_net(const MetricNet& net) {
  AdamState s;
  s.m = zeros_like(net);
  s.v = zeros_like(net);
  return s;
}

void TrainConfig::validate() const {
  if (!(lr > 0) || !std::isfinite(lr)) throw InvalidParameter("train: lr must be positive");
  if (epochs < 1) throw InvalidParameter("train: epochs must be >= 1");
  if (hidden < 1) throw InvalidParameter("train: hidden must be >= 1");
}

MetricNet init_net(int k, int hidden, std::uint64_t seed) {
  if (k < 1 || hidden < 1) throw InvalidDimension("init_net: k and hidden must be >= 1");
  std::mt19937_64 rng(seed);
  MetricNet net;
  net.w1.resize(hidden, k);
  net.w2.resize(k, hidden);
  std::normal_distribution<double> n1(0.0, std::sqrt(2.0 / k));
  for (Eigen::Index i = 0; i < net.w1.size(); ++i) net.w1.data()[i] = n1(rng);
  std::normal_distribution<double> n2(0.0, std::sqrt(2.0 / hidden));
  for (Eigen::Index i = 0; i < net.w2.size(); ++i) net.w2.data()[i] = n2(rng);
  net.b1 = Vector::Zero(hidden);
  net.b2 = Vector::Zero(k);
  return net;
}

namespace {

void check_input(const MetricNet& net, const Vector& h) {
  if (h.size() != net.k()) throw InvalidDimension("metric net: input length does not match k");
}

struct Activations {
  Vector z;
  Vector a;
  Vector out;
};

Activations run_forward(const MetricNet& net, const Vector& h) {
  Activations act;
  act.z = net.w1 * h + net.b1;
  act.a = act.z.cwiseMax(0.0);
  act.out = net.w2 * act.a + net.b2;
  return act;
}

// Shared by adam_step and the fused training loop so both paths agree bit for bit.
struct AdamCoefficients {
  double beta1, beta2, eps, lr, bc1, bc2;

  AdamCoefficients(const AdamState& s, double lr_)
      : beta1(s.beta1),
        beta2(s.beta2),
        eps(s.eps),
        lr(lr_),
        bc1(1.0 - std::pow(s.beta1, static_cast<double>(s.t))),
        bc2(1.0 - std::pow(s.beta2, static_cast<double>(s.t))) {}

  void apply(double& p, double& m, double& v, double g) const {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    p -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
  }
};

template <typename A, typename B, typename C, typename D>
void apply_block(const AdamCoefficients& c, A& p, B& m, C& v, const D& g) {
  double* pp = p.data();
  double* mp = m.data();
  double* vp = v.data();
  const double* gp = g.data();
  for (Eigen::Index i = 0; i < p.size(); ++i) c.apply(pp[i], mp[i], vp[i], gp[i]);
}

}  // namespace

Vector forward(const MetricNet& net, const Vector& h) {
  check_input(net, h);
  return run_forward(net, h).out;
}

Vector unit_impulse(int side) {
  if (side < 1) throw InvalidDimension("unit_impulse: side must be >= 1");
  Vector d = Vector::Zero(static_cast<Eigen::Index>(side) * side);
  d((side / 2) * side + side / 2) = 1.0;
  return d;
}

LossGrads loss_and_grads(const MetricNet& net, const Vector& h, const Vector& delta, TrainLoss loss) {
  check_input(net, h);
  if (delta.size() != net.k()) throw InvalidDimension("metric net: target length does not match k");
  const Activations act = run_forward(net, h);
  const Vector r = act.out - delta;
  LossGrads out;
  out.residual = r.norm();
  out.params = zeros_like(net);
  out.input = Vector::Zero(net.k());
  if (out.residual == 0.0) {
    out.converged = true;
    return out;
  }
  Vector go;
  if (loss == TrainLoss::norm) {
    out.loss = out.residual;
    go = r / out.residual;
  } else {
    out.loss = r.squaredNorm() / net.k();
    go = (2.0 / net.k()) * r;
  }
  out.params.w2 = go * act.a.transpose();
  out.params.b2 = go;
  const Vector ga = net.w2.transpose() * go;
  const Vector gz = (act.z.array() > 0.0).select(ga, 0.0);
  out.params.w1 = gz * h.transpose();
  out.params.b1 = gz;
  out.input = net.w1.transpose() * gz;
  return out;
}

void adam_step(MetricNet& params, const ParamBlocks& grads, AdamState& state, double lr) {
  struct Block {
    const char* name;
    bool finite;
  };
  for (const Block& b : {Block{"w1", grads.w1.allFinite()}, Block{"b1", grads.b1.allFinite()},
                         Block{"w2", grads.w2.allFinite()}, Block{"b2", grads.b2.allFinite()}})
    if (!b.finite) throw NumericFailure(std::string("adam_step: non-finite gradient in block ") + b.name);
  if (grads.w1.rows() != params.w1.rows() || grads.w1.cols() != params.w1.cols() ||
      grads.w2.rows() != params.w2.rows() || grads.w2.cols() != params.w2.cols() ||
      grads.b1.size() != params.b1.size() || grads.b2.size() != params.b2.size())
    throw InvalidDimension("adam_step: gradient shapes do not match parameters");
  ++state.t;
  const AdamCoefficients c(state, lr);
  apply_block(c, params.w1, state.m.w1, state.v.w1, grads.w1);
  apply_block(c, params.b1, state.m.b1, state.v.b1, grads.b1);
  apply_block(c, params.w2, state.m.w2, state.v.w2, grads.w2);
  apply_block(c, params.b2, state.m.b2, state.v.b2, grads.b2);
}

namespace {

std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(epoch) + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// One fused forward/backward/Adam pass. Entries whose gradient has been exactly
// zero since initialization keep zero moments and are left untouched, which is
// the same result adam_step would produce.
class FusedTrainer {
 public:
  FusedTrainer(MetricNet& net, AdamState& state, const Vector& delta, double lr, TrainLoss loss)
      : net_(net), state_(state), delta_(delta), lr_(lr), loss_(loss), ever_active_(net.hidden(), 0) {
    // Units that already carry optimizer state (warm start) must be updated.
    for (int j = 0; j < net.hidden(); ++j)
      if (state.m.w2.col(j).any() || state.m.w1.row(j).any() || state.m.b1(j) != 0.0) ever_active_[j] = 1;
    column_state_.assign(net.k(), 0);
    if (state.t > 0)
      for (int i = 0; i < net.k(); ++i) column_state_[i] = state.m.w1.col(i).any() || state.v.w1.col(i).any();
  }

  // Returns the residual norm before the update.
  double step(const Vector& h, bool fixed_input) {
    const Activations act = run_forward(net_, h);
    const Vector r = act.out - delta_;
    const double residual = r.norm();
    if (!std::isfinite(residual)) throw NumericFailure("train: non-finite residual");
    if (residual == 0.0) return 0.0;

    Vector go = loss_ == TrainLoss::norm ? Vector(r / residual) : Vector((2.0 / net_.k()) * r);
    const Vector ga = net_.w2.transpose() * go;
    const Vector gz = (act.z.array() > 0.0).select(ga, 0.0);
    if (!go.allFinite()) throw NumericFailure("train: non-finite gradient in block w2/b2");
    if (!gz.allFinite()) throw NumericFailure("train: non-finite gradient in block w1/b1");

    for (int j = 0; j < net_.hidden(); ++j)
      if (act.z(j) > 0.0) ever_active_[j] = 1;
    active_.clear();
    for (int j = 0; j < net_.hidden(); ++j)
      if (ever_active_[j]) active_.push_back(j);

    if (!fixed_input || columns_.empty()) {
      columns_.clear();
      for (int i = 0; i < net_.k(); ++i)
        if (!fixed_input || h(i) != 0.0 || column_state_[i]) columns_.push_back(i);
    }

    ++state_.t;
    const AdamCoefficients c(state_, lr_);
    const int k = net_.k();
    const int d = net_.hidden();

    for (int j : active_) {
      const double g = gz(j);
      double* p = net_.w1.data() + static_cast<std::ptrdiff_t>(j) * k;
      double* m = state_.m.w1.data() + static_cast<std::ptrdiff_t>(j) * k;
      double* v = state_.v.w1.data() + static_cast<std::ptrdiff_t>(j) * k;
      if (static_cast<int>(columns_.size()) == k) {
        for (int i = 0; i < k; ++i) c.apply(p[i], m[i], v[i], g * h(i));
      } else {
        for (int i : columns_) c.apply(p[i], m[i], v[i], g * h(i));
      }
      c.apply(net_.b1(j), state_.m.b1(j), state_.v.b1(j), g);
    }

    const bool all_active = static_cast<int>(active_.size()) == d;
    for (int i = 0; i < k; ++i) {
      const double g = go(i);
      double* p = net_.w2.data() + static_cast<std::ptrdiff_t>(i) * d;
      double* m = state_.m.w2.data() + static_cast<std::ptrdiff_t>(i) * d;
      double* v = state_.v.w2.data() + static_cast<std::ptrdiff_t>(i) * d;
      if (all_active) {
        for (int j = 0; j < d; ++j) c.apply(p[j], m[j], v[j], g * act.a(j));
      } else {
        for (int j : active_) c.apply(p[j], m[j], v[j], g * act.a(j));
      }
      c.apply(net_.b2(i), state_.m.b2(i), state_.v.b2(i), g);
    }
    return residual;
  }

 private:
  MetricNet& net_;
  AdamState& state_;
  const Vector& delta_;
  double lr_;
  TrainLoss loss_;
  std::vector<char> ever_active_;
  std::vector<char> column_state_;
  std::vector<int> active_;
  std::vector<int> columns_;
};

MetricResult run_training(const Psf& psf, const TrainConfig& cfg, MetricNet net, AdamState& state) {
  cfg.validate();
  if (net.k() != psf.k()) throw InvalidDimension("train: network k does not match the PSF");
  const Vector delta = unit_impulse(psf.side());
  const bool resample = cfg.noise && !cfg.noise->is_clean() && cfg.resample_noise;

  Vector fixed_h = psf.flatten();
  if (cfg.noise && !resample) fixed_h = add_noise(psf, *cfg.noise).flatten();

  MetricResult result;
  result.loss_curve.reserve(cfg.epochs);
  FusedTrainer trainer(net, state, delta, cfg.lr, cfg.loss);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double residual;
    try {
      if (resample) {
        const NoiseSpec spec{cfg.noise->snr_db, epoch_seed(cfg.noise->seed, epoch)};
        residual = trainer.step(add_noise(psf, spec).flatten(), false);
      } else {
        residual = trainer.step(fixed_h, true);
      }
    } catch (const NumericFailure& e) {
      throw NumericFailure(e.what(), result.loss_curve);
    }
    result.loss_curve.push_back(residual);
    if (residual == 0.0) {
      result.converged = true;
      result.loss_curve.resize(cfg.epochs, 0.0);
      break;
    }
  }
  const auto best = std::min_element(result.loss_curve.begin(), result.loss_curve.end());
  result.value = *best;
  result.best_value = *best;
  result.best_epoch = static_cast<int>(best - result.loss_curve.begin());
  result.net = std::move(net);
  return result;
}

}  // namespace

MetricResult train_metric(const Psf& psf, const TrainConfig& cfg) {
  cfg.validate();
  MetricNet net = init_net(psf.k(), cfg.hidden, cfg.seed);
  AdamState state = AdamState::for_net(net);
  return run_training(psf, cfg, std::move(net), state);
}

MetricResult train_from(const Psf& psf, const TrainConfig& cfg, MetricNet net, AdamState& state) {
  return run_training(psf, cfg, std::move(net), state);
}

MetricGradient metric_input_gradient(const MetricNet& net, const Vector& h, const Vector& delta) {
  check_input(net, h);
  const Activations act = run_forward(net, h);
  const Vector r = act.out - delta;
  MetricGradient g;
  g.value = r.norm();
  g.input_grad = Vector::Zero(net.k());
  if (g.value == 0.0) return g;
  const Vector ga = net.w2.transpose() * (r / g.value);
  const Vector gz = (act.z.array() > 0.0).select(ga, 0.0);
  g.input_grad = net.w1.transpose() * gz;
  return g;
}

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

template <typename M>
void put_block(std::ostream& out, const M& m) {
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

template <typename M>
void get_block(std::istream& in, M& m) {
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const MetricNet& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write("MNET", 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.k()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.hidden()));
  put_block(out, net.w1);
  put_block(out, net.b1);
  put_block(out, net.w2);
  put_block(out, net.b2);
}

MetricNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "MNET", 4) != 0) throw InvalidInput(path.string() + ": bad checkpoint magic");
  const auto k = get<std::uint32_t>(in);
  const auto d = get<std::uint32_t>(in);
  if (!in || k == 0 || d == 0) throw InvalidInput(path.string() + ": bad checkpoint header");
  MetricNet net;
  net.w1.resize(d, k);
  net.b1.resize(d);
  net.w2.resize(k, d);
  net.b2.resize(k);
  get_block(in, net.w1);
  get_block(in, net.b1);
  get_block(in, net.w2);
  get_block(in, net.b2);
  if (!in) throw InvalidInput(path.string() + ": truncated checkpoint");
  return net;
}

void write_loss_curve_csv(const std::vector<double>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "epoch,loss\n" << std::setprecision(17);
  for (size_t i = 0; i < curve.size(); ++i) out << i << ',' << curve[i] << '\n';
}

nlohmann::json result_json(const MetricResult& r, const std::string& psf_id, const TrainConfig& cfg,
                           const std::string& loss_curve_path) {
  return nlohmann::json{{"psf_id", psf_id},
                        {"metric", r.value},
                        {"epochs", cfg.epochs},
                        {"hidden", cfg.hidden},
                        {"seed", cfg.seed},
                        {"lr", cfg.lr},
                        {"train_loss", cfg.loss == TrainLoss::norm ? "norm" : "mean_squared"},
                        {"best_epoch", r.best_epoch},
                        {"loss_curve_path", loss_curve_path}};
}

}  // namespace psfinv::metric
