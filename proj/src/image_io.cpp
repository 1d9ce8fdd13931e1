#include "psfinv/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "psfinv/errors.hpp"
#include "psfinv/fft.hpp"

namespace psfinv::image {

namespace fs = std::filesystem;

Grid Image::luminance() const {
  if (channels.empty()) throw InvalidInput("image: no channels");
  Grid sum = Grid::Zero(rows(), cols());
  for (const auto& c : channels) sum += c;
  return sum / static_cast<double>(channels.size());
}

namespace {

// Next header token, skipping whitespace and # comments.
long read_header_int(std::istream& in, const fs::path& path) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), ::isdigit))
    throw InvalidInput(path.string() + ": bad PNM header");
  return std::stol(tok);
}

}  // namespace

Image load_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path.string());
  char magic[2];
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
    throw InvalidInput(path.string() + ": not a binary PGM/PPM file");
  const int nch = magic[1] == '5' ? 1 : 3;
  const long cols = read_header_int(in, path);
  const long rows = read_header_int(in, path);
  const long maxval = read_header_int(in, path);
  if (cols < 1 || rows < 1 || cols > 1 << 15 || rows > 1 << 15) throw InvalidInput(path.string() + ": bad size");
  if (maxval < 1 || maxval > 65535) throw InvalidInput(path.string() + ": bad maxval");
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(rows * cols * nch * bytes));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw InvalidInput(path.string() + ": truncated pixel data");
  Image img;
  img.channels.assign(nch, Grid(rows, cols));
  const double scale = 1.0 / static_cast<double>(maxval);
  std::size_t pos = 0;
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c)
      for (int ch = 0; ch < nch; ++ch) {
        unsigned v = raw[pos++];
        if (bytes == 2) v = (v << 8) | raw[pos++];
        img.channels[ch](r, c) = v * scale;
      }
  return img;
}

namespace {

void write_pnm(const std::vector<Grid>& chans, const fs::path& path, int bits, char kind) {
  if (bits != 8 && bits != 16) throw InvalidParameter("save: bits must be 8 or 16");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  const long maxval = bits == 8 ? 255 : 65535;
  const auto rows = chans[0].rows(), cols = chans[0].cols();
  out << 'P' << kind << '\n' << cols << ' ' << rows << '\n' << maxval << '\n';
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      for (const auto& g : chans) {
        const double v = std::clamp(g(r, c), 0.0, 1.0);
        const auto q = static_cast<unsigned>(std::lround(v * maxval));
        if (bits == 16) out.put(static_cast<char>(q >> 8));
        out.put(static_cast<char>(q & 0xff));
      }
}

}  // namespace

void save_pgm(const Grid& g, const fs::path& path, int bits) { write_pnm({g}, path, bits, '5'); }

void save_ppm(const std::vector<Grid>& rgb, const fs::path& path) {
  if (rgb.size() != 3) throw InvalidDimension("save_ppm: need three channels");
  write_pnm(rgb, path, 8, '6');
}

Grid center_crop(const Grid& g, int side) {
  if (side < 1 || g.rows() < side || g.cols() < side) throw InvalidDimension("center_crop: image smaller than crop");
  return g.block((g.rows() - side) / 2, (g.cols() - side) / 2, side, side);
}

Grid normalize_range(const Grid& g) {
  const double lo = g.minCoeff(), hi = g.maxCoeff();
  if (hi == lo) return Grid::Zero(g.rows(), g.cols());
  return ((g.array() - lo) / (hi - lo)).matrix();
}

Grid piecewise_constant_scene(int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.0, side), level(0.0, 1.0);
  Grid g = Grid::Constant(side, side, 0.2);
  for (int s = 0; s < 6; ++s) {
    const double r0 = pos(rng), c0 = pos(rng), h = pos(rng) / 2, w = pos(rng) / 2, v = level(rng);
    const bool disk = s % 2 == 1;
    for (int i = 0; i < side; ++i)
      for (int j = 0; j < side; ++j) {
        const bool in = disk ? (i - r0) * (i - r0) + (j - c0) * (j - c0) <= h * h
                             : i >= r0 && i < r0 + h && j >= c0 && j < c0 + w;
        if (in) g(i, j) = v;
      }
  }
  return g;
}

Grid sinusoidal_scene(int side) {
  Grid g(side, side);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j)
      g(i, j) = 0.5 + 0.25 * std::sin(2 * kPi * 3 * j / side) + 0.2 * std::cos(2 * kPi * 5 * (i + j) / side);
  return g;
}

Grid checkerboard_scene(int side, int cell) {
  if (cell < 1) throw InvalidParameter("checkerboard: cell must be >= 1");
  Grid g(side, side);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) g(i, j) = ((i / cell + j / cell) % 2) ? 0.9 : 0.1;
  return g;
}

Grid smooth_random_scene(int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Grid white(side, side);
  for (Eigen::Index i = 0; i < white.size(); ++i) white.data()[i] = normal(rng);
  ComplexGrid spec = fft::forward(white);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) {
      const double fi = std::min(i, side - i), fj = std::min(j, side - j);
      spec(i, j) *= std::exp(-(fi * fi + fj * fj) / (2.0 * 16.0));
    }
  return normalize_range(fft::inverse_real(spec));
}

SceneSet synthetic_scenes(int side, std::uint64_t seed) {
  SceneSet s;
  s.scenes = {piecewise_constant_scene(side, seed), sinusoidal_scene(side), checkerboard_scene(side, std::max(1, side / 8)),
              smooth_random_scene(side, seed + 1)};
  s.names = {"piecewise_constant", "sinusoidal", "checkerboard", "smooth_random"};
  return s;
}

SceneSet ingest_images(const fs::path& dir, int side, bool synthetic, std::uint64_t seed, std::size_t max_files) {
  SceneSet s;
  std::vector<fs::path> files;
  if (!dir.empty()) {
    if (!fs::is_directory(dir)) throw ConfigError("image directory does not exist: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir)) {
      auto ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  }
  for (const auto& f : files) {
    if (max_files && s.scenes.size() >= max_files) break;
    try {
      s.scenes.push_back(center_crop(load_pnm(f).luminance(), side));
      s.names.push_back(f.filename().string());
    } catch (const Error& e) {
      s.warnings.push_back(std::string("skipped ") + f.string() + ": " + e.what());
    }
  }
  if (s.scenes.empty()) {
    if (!synthetic) throw ConfigError("no usable images in '" + dir.string() + "' and synthetic scenes are disabled");
    auto syn = synthetic_scenes(side, seed);
    syn.warnings = std::move(s.warnings);
    return syn;
  }
  return s;
}

}  // namespace psfinv::image
