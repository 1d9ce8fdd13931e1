#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace psfinv {

// Resolved key/value configuration. Layers, lowest first: built-in defaults,
// profile ("desk" or "paper"), config file, command-line flags.
class RunConfig {
 public:
  RunConfig();

  static const std::vector<std::string>& known_keys();
  static bool is_known(const std::string& key);

  // "key = value" lines, # starts a comment; unknown keys throw ConfigError.
  void load_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  // Apply a profile's defaults without touching keys set explicitly.
  void apply_profile(const std::string& name);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  bool explicitly_set(const std::string& key) const { return explicit_.count(key) > 0; }

  double get_double(const std::string& key) const;
  long get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<int> get_ints(const std::string& key) const;

  // Sorted "key = value" lines, excluding out and config.
  std::string snapshot() const;
  void write_snapshot(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> explicit_;
};

// --threads value, else PSFINV_THREADS, else 1.
int resolve_threads(const RunConfig& cfg);

}  // namespace psfinv
