#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "psfinv/grid.hpp"

namespace psfinv::image {

// Channels scaled to [0, 1]; one grid for PGM, three for PPM.
struct Image {
  std::vector<Grid> channels;

  int rows() const { return channels.empty() ? 0 : static_cast<int>(channels[0].rows()); }
  int cols() const { return channels.empty() ? 0 : static_cast<int>(channels[0].cols()); }
  Grid luminance() const;
};

// Binary P5 (8 or 16 bit) and P6 files.
Image load_pnm(const std::filesystem::path& path);
void save_pgm(const Grid& g, const std::filesystem::path& path, int bits = 8);
void save_ppm(const std::vector<Grid>& rgb, const std::filesystem::path& path);

// Centered side x side window; throws InvalidDimension when the image is smaller.
Grid center_crop(const Grid& g, int side);

// Linear map of [min, max] onto [0, 1] (constant grids become zeros).
Grid normalize_range(const Grid& g);

Grid piecewise_constant_scene(int side, std::uint64_t seed);
Grid sinusoidal_scene(int side);
Grid checkerboard_scene(int side, int cell = 8);
Grid smooth_random_scene(int side, std::uint64_t seed);

struct SceneSet {
  std::vector<Grid> scenes;
  std::vector<std::string> names;
  std::vector<std::string> warnings;
};

SceneSet synthetic_scenes(int side, std::uint64_t seed);

// Loads *.pgm/*.ppm in name order, crops to side and converts to luminance.
// Unreadable files become warnings. Falls back to synthetic scenes when none
// load and `synthetic` is set; otherwise throws ConfigError.
SceneSet ingest_images(const std::filesystem::path& dir, int side, bool synthetic, std::uint64_t seed = 1,
                       std::size_t max_files = 0);

}  // namespace psfinv::image
