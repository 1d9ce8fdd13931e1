#include "psfinv/optics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "psfinv/conv.hpp"
#include "psfinv/errors.hpp"
#include "psfinv/fft.hpp"

namespace psfinv::optics {

OpticalParams OpticalParams::desk_default(int aperture_side) {
  OpticalParams p;
  p.wavelengths = {460e-9, 550e-9, 640e-9};
  p.z = 0.05;
  p.delta_eta = 0.5;
  p.aperture_side = aperture_side;
  p.pitch = 0.9 * std::sqrt(p.wavelengths.front() * p.z / aperture_side);
  p.sensitivity = Eigen::MatrixXd::Identity(3, 3);
  return p;
}

void OpticalParams::validate() const {
  if (wavelengths.empty()) throw InvalidParameter("optics: at least one wavelength required");
  for (double w : wavelengths)
    if (!(w > 0) || !std::isfinite(w)) throw InvalidParameter("optics: wavelengths must be positive");
  if (!(z > 0) || !(delta_eta > 0) || !(pitch > 0))
    throw InvalidParameter("optics: z, delta_eta and pitch must be positive");
  if (aperture_side < 3) throw InvalidDimension("optics: aperture_side must be >= 3");
  if (sensitivity.cols() != static_cast<Eigen::Index>(wavelengths.size()) || sensitivity.rows() < 1)
    throw InvalidDimension("optics: sensitivity must be channels x wavelengths");
  for (Eigen::Index c = 0; c < sensitivity.rows(); ++c) {
    if ((sensitivity.row(c).array() < 0).any())
      throw InvalidParameter("optics: sensitivity weights must be non-negative");
    if (std::abs(sensitivity.row(c).sum() - 1.0) > 1e-9)
      throw InvalidParameter("optics: sensitivity rows must sum to 1");
  }
}

void check_sampling(const OpticalParams& p, int wavelength_index) {
  const double lambda = p.wavelengths.at(wavelength_index);
  const double bound = lambda * p.z / p.aperture_side;
  if (p.pitch * p.pitch > bound) {
    std::ostringstream os;
    os << "optics: quadratic-phase aliasing, pitch^2 = " << p.pitch * p.pitch
       << " exceeds lambda*z/side = " << bound << " at lambda = " << lambda;
    throw AliasingError(os.str());
  }
}

double sensor_pixel_size(const OpticalParams& p, int wavelength_index) {
  return p.wavelengths.at(wavelength_index) * p.z / (p.aperture_side * p.pitch);
}

std::pair<int, int> noll_to_nm(int j) {
  if (j < 1) throw InvalidParameter("zernike: Noll index starts at 1");
  int n = 0;
  int j1 = j - 1;
  while (j1 > n) {
    ++n;
    j1 -= n;
  }
  const int sign = (j % 2 == 0) ? 1 : -1;
  const int m = sign * ((n % 2) + 2 * ((j1 + ((n + 1) % 2)) / 2));
  return {n, m};
}

Grid aperture_mask(int side) {
  Grid mask = Grid::Zero(side, side);
  const double radius = side / 2 - 1.0;
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) {
      const double y = side / 2 - i, x = j - side / 2;
      if (x * x + y * y <= radius * radius + 1e-9) mask(i, j) = 1.0;
    }
  if (side < 4) mask(side / 2, side / 2) = 1.0;
  return mask;
}

namespace {

double radial(int n, int m, double rho) {
  m = std::abs(m);
  double sum = 0.0;
  for (int s = 0; s <= (n - m) / 2; ++s) {
    const double num = std::tgamma(n - s + 1.0);
    const double den = std::tgamma(s + 1.0) * std::tgamma((n + m) / 2 - s + 1.0) * std::tgamma((n - m) / 2 - s + 1.0);
    sum += ((s % 2) ? -1.0 : 1.0) * num / den * std::pow(rho, n - 2 * s);
  }
  return sum;
}

}  // namespace

ZernikeBasis zernike_basis(int count, int side) {
  if (count < 1) throw InvalidParameter("zernike: count must be >= 1");
  if (side < 16) throw InvalidDimension("zernike: side must be >= 16");
  ZernikeBasis basis;
  basis.count = count;
  basis.side = side;
  const Grid mask = aperture_mask(side);
  const double radius = side / 2 - 1.0;
  for (int j = 1; j <= count; ++j) {
    const auto [n, m] = noll_to_nm(j);
    const double norm = std::sqrt(n + 1.0) * (m == 0 ? 1.0 : std::sqrt(2.0));
    Grid z = Grid::Zero(side, side);
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) {
        if (mask(r, c) == 0.0) continue;
        const double y = side / 2 - r, x = c - side / 2;
        const double rho = std::sqrt(x * x + y * y) / radius;
        const double theta = std::atan2(y, x);
        double az = 1.0;
        if (m > 0) az = std::cos(m * theta);
        if (m < 0) az = std::sin(-m * theta);
        z(r, c) = norm * radial(n, m, rho) * az;
      }
    // Gram-Schmidt on the sampled disk removes the pixelization cross terms.
    for (const Grid& prev : basis.grids) z -= ((z.array() * prev.array()).sum() / prev.squaredNorm()) * prev;
    z *= std::sqrt(mask.sum() / z.squaredNorm());
    basis.grids.push_back(std::move(z));
  }
  return basis;
}

Heightmap make_heightmap(const Vector& coeffs, const ZernikeBasis& basis) {
  if (coeffs.size() > basis.count) throw InvalidDimension("heightmap: more coefficients than basis functions");
  Heightmap h{coeffs, Grid::Zero(basis.side, basis.side)};
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) h.phi += coeffs(i) * basis.grids[i];
  return h;
}

Grid phase_to_height(const Grid& phase, const OpticalParams& p, int wavelength_index) {
  return phase * (p.wavelengths.at(wavelength_index) / (2.0 * kPi * p.delta_eta));
}

namespace {

// Apertured field just before the Fourier transform.
ComplexGrid pupil_field(const Grid& phi, const OpticalParams& p, int w) {
  const int n = p.aperture_side;
  if (phi.rows() != n || phi.cols() != n) throw InvalidDimension("render_psf: heightmap must match aperture_side");
  check_sampling(p, w);
  const double lambda = p.wavelengths[w];
  const double lens = 2.0 * kPi * p.delta_eta / lambda;
  const double quad = kPi / (lambda * p.z);
  const Grid mask = aperture_mask(n);
  ComplexGrid u = ComplexGrid::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (mask(i, j) == 0.0) continue;
      const double y = (n / 2 - i) * p.pitch, x = (j - n / 2) * p.pitch;
      u(i, j) = std::polar(1.0, lens * phi(i, j) + quad * (x * x + y * y));
    }
  return u;
}

// Centered unitary DFT.
ComplexGrid propagate(const ComplexGrid& u) {
  ComplexGrid f = fft::shift(fft::forward(fft::ishift(u)));
  f /= static_cast<double>(u.rows());
  return f;
}

}  // namespace

double render_mass(const Grid& phi, const OpticalParams& p, int wavelength_index) {
  return propagate(pupil_field(phi, p, wavelength_index)).cwiseAbs2().sum();
}

Psf render_psf(const Grid& phi, const OpticalParams& p, int wavelength_index, std::string id) {
  const ComplexGrid f = propagate(pupil_field(phi, p, wavelength_index));
  return Psf(f.cwiseAbs2(), std::move(id));
}

Psf render_psf(const Heightmap& h, const OpticalParams& p, int wavelength_index) {
  return render_psf(h.phi, p, wavelength_index);
}

PsfSensitivity render_psf_sensitivity(const Vector& coeffs, const ZernikeBasis& basis, const OpticalParams& p,
                                      int wavelength_index) {
  const Heightmap h = make_heightmap(coeffs, basis);
  const ComplexGrid u = pupil_field(h.phi, p, wavelength_index);
  const ComplexGrid f = propagate(u);
  const Grid intensity = f.cwiseAbs2();
  const double mass = intensity.sum();
  const double lens = 2.0 * kPi * p.delta_eta / p.wavelengths[wavelength_index];
  const std::complex<double> i_unit(0.0, 1.0);

  PsfSensitivity out;
  out.psf = intensity / mass;
  for (Eigen::Index l = 0; l < coeffs.size(); ++l) {
    const ComplexGrid du = (i_unit * lens) * (basis.grids[l].cast<std::complex<double>>().cwiseProduct(u));
    const ComplexGrid df = propagate(du);
    const Grid dI = 2.0 * (f.conjugate().cwiseProduct(df)).real();
    out.d_coeff.push_back(dI / mass - intensity * (dI.sum() / (mass * mass)));
  }
  return out;
}

Grid wrap_phase(const Grid& phase) {
  return phase.unaryExpr([](double v) {
    double w = std::fmod(v, 2.0 * kPi);
    if (w < 0) w += 2.0 * kPi;
    return w;
  });
}

Grid fresnel_lens_phase(const OpticalParams& p, double focal, int wavelength_index) {
  if (!(focal > 0)) throw InvalidParameter("fresnel_lens_phase: focal must be positive");
  const int n = p.aperture_side;
  const double lambda = p.wavelengths.at(wavelength_index);
  Grid phase(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double y = (n / 2 - i) * p.pitch, x = (j - n / 2) * p.pitch;
      phase(i, j) = -kPi * (x * x + y * y) / (lambda * focal);
    }
  return wrap_phase(phase);
}

Grid spiral_phase(int charge, int side) {
  if (charge == 0) throw InvalidParameter("spiral_phase: charge must be non-zero");
  Grid phase(side, side);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) phase(i, j) = charge * std::atan2(double(side / 2 - i), double(j - side / 2));
  return wrap_phase(phase);
}

Grid random_phase(int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 2.0 * kPi);
  Grid phase(side, side);
  for (Eigen::Index i = 0; i < phase.size(); ++i) phase.data()[i] = uni(rng);
  return phase;
}

std::vector<Grid> sensor_image(const std::vector<Grid>& scene, const Grid& phi, const OpticalParams& p) {
  p.validate();
  if (scene.size() != p.wavelengths.size())
    throw InvalidDimension("sensor_image: scene needs one grid per wavelength");
  std::vector<Grid> blurred;
  for (size_t w = 0; w < scene.size(); ++w) {
    const Psf h = render_psf(phi, p, static_cast<int>(w));
    blurred.push_back(convolve(scene[w], make_operator(h, static_cast<int>(scene[w].rows()))));
  }
  std::vector<Grid> out;
  for (int c = 0; c < p.channels(); ++c) {
    Grid g = Grid::Zero(scene[0].rows(), scene[0].cols());
    for (size_t w = 0; w < scene.size(); ++w) g += p.sensitivity(c, static_cast<Eigen::Index>(w)) * blurred[w];
    out.push_back(std::move(g));
  }
  return out;
}

double second_moment_radius(const Grid& psf) {
  const double mass = psf.sum();
  double cr = 0, cc = 0;
  for (Eigen::Index i = 0; i < psf.rows(); ++i)
    for (Eigen::Index j = 0; j < psf.cols(); ++j) {
      cr += i * psf(i, j);
      cc += j * psf(i, j);
    }
  cr /= mass;
  cc /= mass;
  double m2 = 0;
  for (Eigen::Index i = 0; i < psf.rows(); ++i)
    for (Eigen::Index j = 0; j < psf.cols(); ++j) m2 += ((i - cr) * (i - cr) + (j - cc) * (j - cc)) * psf(i, j);
  return std::sqrt(m2 / mass);
}

double encircled_energy(const Grid& psf, int half) {
  const Eigen::Index cr = psf.rows() / 2, cc = psf.cols() / 2;
  return psf.block(cr - half, cc - half, 2 * half + 1, 2 * half + 1).sum() / psf.sum();
}

void write_coeffs_csv(const Vector& coeffs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "index,a_i\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) out << (i + 1) << ',' << coeffs(i) << '\n';
}

Vector read_coeffs_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InvalidInput("coefficient csv: malformed line '" + line + "'");
    values.push_back(std::stod(line.substr(comma + 1)));
  }
  return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace psfinv::optics
