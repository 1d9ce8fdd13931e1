#include "psfinv/psf.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "psfinv/errors.hpp"
#include "psfinv/optics.hpp"

namespace psfinv {

Psf::Psf(Grid data, std::string id) : data_(std::move(data)), id_(std::move(id)) {
  if (data_.rows() < 1 || data_.rows() != data_.cols()) throw InvalidDimension("psf: grid must be square and non-empty");
  if (!data_.allFinite()) throw InvalidInput("psf: non-finite entries");
  if ((data_.array() < 0).any()) throw InvalidInput("psf: negative entries");
  const double mass = data_.sum();
  if (!(mass > 0)) throw InvalidInput("psf: zero total mass");
  data_ /= mass;
}

Psf impulse_psf(int side) {
  if (side < 1) throw InvalidDimension("impulse_psf: side must be >= 1");
  Grid g = Grid::Zero(side, side);
  g(side / 2, side / 2) = 1.0;
  return Psf(std::move(g), "impulse");
}

Psf gaussian_psf(int side, double sigma) {
  if (side < 1) throw InvalidDimension("gaussian_psf: side must be >= 1");
  if (!(sigma > 0) || !std::isfinite(sigma)) throw InvalidParameter("gaussian_psf: sigma must be positive");
  Grid g(side, side);
  const int c = side / 2;
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) {
      const double u = i - c, v = j - c;
      g(i, j) = std::exp(-(u * u + v * v) / (2.0 * sigma * sigma));
    }
  std::ostringstream id;
  id << "gauss_s" << sigma;
  return Psf(std::move(g), id.str());
}

Psf motion_blur_psf(int side, int length, double angle_deg) {
  if (side < 1) throw InvalidDimension("motion_blur_psf: side must be >= 1");
  if (length < 1 || length > side) throw InvalidParameter("motion_blur_psf: need 1 <= length <= side");
  // Exact direction cosines on the axes keep the 0/90 degree cases transposes of each other.
  double a = std::fmod(angle_deg, 360.0);
  if (a < 0) a += 360.0;
  double cs, sn;
  if (a == 0.0) {
    cs = 1, sn = 0;
  } else if (a == 90.0) {
    cs = 0, sn = 1;
  } else if (a == 180.0) {
    cs = -1, sn = 0;
  } else if (a == 270.0) {
    cs = 0, sn = -1;
  } else {
    cs = std::cos(a * kPi / 180.0);
    sn = std::sin(a * kPi / 180.0);
  }
  Grid g = Grid::Zero(side, side);
  const int c = side / 2;
  for (int s = 0; s < length; ++s) {
    const double t = s - (length - 1) / 2.0;
    const long col = std::lround(c + t * cs);
    const long row = std::lround(c - t * sn);
    if (row >= 0 && row < side && col >= 0 && col < side) g(row, col) += 1.0;
  }
  std::ostringstream id;
  id << "motion_l" << length << "_a" << angle_deg;
  return Psf(std::move(g), id.str());
}

Psf diffuser_psf(int side, std::uint64_t seed) {
  if (side < 3) throw InvalidDimension("diffuser_psf: side must be >= 3");
  const auto params = optics::OpticalParams::desk_default(side);
  const int w = params.design_index();
  const Grid phi = optics::phase_to_height(optics::random_phase(side, seed), params, w);
  return optics::render_psf(phi, params, w, "diffuser_" + std::to_string(seed));
}

Psf box_psf(int side, int width) {
  if (side < 1 || width < 1 || width > side) throw InvalidParameter("box_psf: need 1 <= width <= side");
  Grid g = Grid::Zero(side, side);
  const int start = side / 2 - width / 2;
  g.block(start, start, width, width).setOnes();
  return Psf(std::move(g), "box_w" + std::to_string(width));
}

Grid draw_noise(const Psf& psf, const NoiseSpec& spec) {
  if (std::isnan(spec.snr_db) || spec.snr_db == -kInf) throw InvalidParameter("add_noise: snr_db must be finite");
  if (spec.is_clean()) return Grid::Zero(psf.side(), psf.side());
  const double energy = psf.data().squaredNorm();
  const double sigma = std::sqrt(energy / (psf.k() * std::pow(10.0, spec.snr_db / 10.0)));
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, sigma);
  Grid eps(psf.side(), psf.side());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(rng);
  return eps;
}

Psf add_noise(const Psf& psf, const NoiseSpec& spec) {
  if (spec.is_clean()) {
    draw_noise(psf, spec);
    return psf;
  }
  Grid noisy = (psf.data() + draw_noise(psf, spec)).cwiseMax(0.0);
  if (!(noisy.sum() > 0)) throw NumericFailure("add_noise: every entry clamped to zero");
  std::ostringstream id;
  id << psf.id() << "_snr" << spec.snr_db;
  return Psf(std::move(noisy), id.str());
}

double entropy(const Psf& psf) {
  double h = 0;
  for (Eigen::Index i = 0; i < psf.data().size(); ++i) {
    const double p = psf.data().data()[i];
    if (p > 0) h -= p * std::log(p);
  }
  return h;
}

Psf crop_center(const Psf& psf, int side) {
  if (side < 1 || side > psf.side()) throw InvalidDimension("crop_center: side out of range");
  if (side == psf.side()) return psf;
  const int start = psf.side() / 2 - side / 2;
  return Psf(psf.data().block(start, start, side, side), psf.id());
}

void write_psf_text(const Psf& psf, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "PSF " << psf.side() << '\n' << std::setprecision(17);
  for (int i = 0; i < psf.side(); ++i) {
    for (int j = 0; j < psf.side(); ++j) out << (j ? " " : "") << psf(i, j);
    out << '\n';
  }
}

Psf read_psf_text(const std::filesystem::path& path, std::string id) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read " + path.string());
  std::string magic;
  int side = 0;
  if (!(in >> magic >> side) || magic != "PSF" || side < 1) throw InvalidInput(path.string() + ": bad PSF header");
  Grid g(side, side);
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (!(in >> g.data()[i])) throw InvalidInput(path.string() + ": truncated PSF data");
  return Psf(std::move(g), std::move(id));
}

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "raster IO assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

}  // namespace

void write_psf_raster(const Psf& psf, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write("PSF1", 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(psf.side()));
  put_le<std::uint64_t>(out, 0);
  for (Eigen::Index i = 0; i < psf.data().size(); ++i) put_le<float>(out, static_cast<float>(psf.data().data()[i]));
}

Psf read_psf_raster(const std::filesystem::path& path, std::string id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PSF1", 4) != 0) throw InvalidInput(path.string() + ": bad raster magic");
  const auto side = get_le<std::uint32_t>(in);
  get_le<std::uint64_t>(in);
  if (!in || side == 0 || side > 1u << 14) throw InvalidInput(path.string() + ": bad raster side");
  Grid g(side, side);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = get_le<float>(in);
  if (!in) throw InvalidInput(path.string() + ": truncated raster");
  return Psf(std::move(g), std::move(id));
}

}  // namespace psfinv
