#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "psfinv/config.hpp"
#include "psfinv/psf.hpp"

namespace psfinv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

// args excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

// PSF described by the psf/side/sigma/... keys, with snr_db noise applied when finite.
Psf psf_from_config(const RunConfig& cfg);

}  // namespace psfinv::cli
