#include "psfinv/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "psfinv/errors.hpp"

namespace psfinv {

namespace {

const std::vector<std::pair<std::string, std::string>>& defaults() {
  static const std::vector<std::pair<std::string, std::string>> d = {
      {"angle", "0"},
      {"charge", "1"},
      {"coeffs", ""},
      {"config", ""},
      {"defocus", "0.5"},
      {"epochs", "300"},
      {"focal_scale", "1"},
      {"format", "text"},
      {"gamma", "0.001"},
      {"gammas", "0,0.001,0.01,1,10"},
      {"hidden", "256"},
      {"image", ""},
      {"image_side", "64"},
      {"init_focus", "0.8"},
      {"inner_epochs", "50"},
      {"inner_lr", "0.001"},
      {"input", ""},
      {"length", "5"},
      {"loss", "mean_squared"},
      {"lr", "0.001"},
      {"measure_snr_db", "40"},
      {"method", "auto"},
      {"motion_focused", "3"},
      {"motion_spread", "15"},
      {"noise_seed", "0"},
      {"noise_std", "0.01"},
      {"num_coeffs", "15"},
      {"out", ""},
      {"outer_epochs", "100"},
      {"outer_lr", "0.2"},
      {"preset", "fresnel"},
      {"profile", "desk"},
      {"psf", "gauss"},
      {"reps", "3"},
      {"resample_noise", "false"},
      {"rl_iters", "30"},
      {"scene", "piecewise_constant"},
      {"scene_dir", ""},
      {"seed", "1"},
      {"side", "32"},
      {"sides", "16,32,64"},
      {"sigma", "2"},
      {"sigma2", "0.001"},
      {"sigmas", "0.5,1,2,4"},
      {"snr_db", "inf"},
      {"snrs", "25,35"},
      {"solver", "wiener"},
      {"synthetic", "true"},
      {"threads", "0"},
      {"tv_iters", "100"},
      {"tv_rho", "0.02"},
      {"warm_start", "true"},
      {"wavelength_index", "-1"},
      {"width", "3"},
  };
  return d;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& p : defaults()) k.push_back(p.first);
    return k;
  }();
  return keys;
}

bool RunConfig::is_known(const std::string& key) {
  const auto& k = known_keys();
  return std::find(k.begin(), k.end(), key) != k.end();
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!is_known(key)) throw ConfigError("unknown configuration key '" + key + "'");
  values_[key] = value;
  explicit_[key] = value;
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (!is_known(key)) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    // Command-line flags win over the file.
    if (!explicit_.count(key)) values_[key] = trim(line.substr(eq + 1));
  }
}

void RunConfig::apply_profile(const std::string& name) {
  std::vector<std::pair<std::string, std::string>> p;
  if (name == "desk") {
    // built-in defaults already are the desk profile
  } else if (name == "paper") {
    p = {{"side", "128"}, {"image_side", "128"}, {"hidden", "2048"}, {"epochs", "1000"},
         {"num_coeffs", "350"}, {"inner_epochs", "500"}, {"outer_lr", "0.001"}};
  } else {
    throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
  }
  for (const auto& [k, v] : p)
    if (!explicit_.count(k)) values_[k] = v;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) && !values_.at(key).empty(); }

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("key '" + key + "': expected a number, got '" + s + "'");
  return v;
}

long RunConfig::get_int(const std::string& key) const {
  const std::string& s = get(key);
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("key '" + key + "': expected an integer, got '" + s + "'");
  return v;
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
  const std::string& s = get(key);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("key '" + key + "': expected an unsigned integer, got '" + s + "'");
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + s + "'");
}

std::vector<double> RunConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(get(key));
  std::string item;
  RunConfig tmp;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    tmp.values_["sigma"] = item;
    try {
      out.push_back(tmp.get_double("sigma"));
    } catch (const ConfigError&) {
      throw ConfigError("key '" + key + "': bad list entry '" + item + "'");
    }
  }
  return out;
}

std::vector<int> RunConfig::get_ints(const std::string& key) const {
  std::vector<int> out;
  for (double v : get_doubles(key)) {
    if (v != std::floor(v)) throw ConfigError("key '" + key + "': expected integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::string RunConfig::snapshot() const {
  std::ostringstream o;
  // The output location and config path do not influence results.
  for (const auto& [k, v] : values_)
    if (k != "out" && k != "config") o << k << " = " << v << '\n';
  return o.str();
}

void RunConfig::write_snapshot(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << snapshot();
}

int resolve_threads(const RunConfig& cfg) {
  long n = cfg.get_int("threads");
  if (n <= 0) {
    if (const char* env = std::getenv("PSFINV_THREADS")) {
      try {
        n = std::stol(env);
      } catch (const std::exception&) {
        throw ConfigError(std::string("PSFINV_THREADS: not an integer: ") + env);
      }
    }
  }
  return n <= 0 ? 1 : static_cast<int>(n);
}

}  // namespace psfinv
