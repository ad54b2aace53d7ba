#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace hmgdyn::cli {

// Flat key = value settings with dotted keys ("train.batch_size"). Lines
// starting with '#' are comments. Later assignments win.
class RunConfig {
 public:
  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig parse(const std::string& text, const std::string& origin = "<config>");

  void set(const std::string& key, const std::string& value);
  // "key=value" form used by --set.
  void set_assignment(const std::string& assignment);
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::string require(const std::string& key) const;

  // Records the value actually used so the resolved file is complete.
  template <typename T>
  void resolve(const std::string& key, const T& value);
  // Throws ConfigInvalid for keys outside the allowed set.
  void check_keys(std::span<const std::string> allowed) const;

  std::string to_text() const;
  void write(const std::filesystem::path& path) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Simple CDF plot: log-x axis over the threshold range, one polyline per curve.
struct CdfCurve {
  std::string name;
  std::vector<double> fractions;
};
void render_cdf_png(const std::filesystem::path& path, std::span<const double> thresholds,
                    std::span<const CdfCurve> curves, int width = 480, int height = 320);

// Maps library error kinds onto exit codes: 2 config, 3 data, 4 numeric.
int exit_code_for(int error_kind);

// Full command-line entry point; returns the process exit code.
int run(int argc, char** argv);

}  // namespace hmgdyn::cli
