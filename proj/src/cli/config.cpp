#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "hmgdyn/cli.hpp"
#include "hmgdyn/error.hpp"

namespace hmgdyn::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& what) {
  throw Error(ErrorKind::ConfigInvalid, key + " = '" + value + "' is not " + what);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || trim(t.substr(0, eq)).empty()) {
      throw Error(ErrorKind::ConfigInvalid, origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::ConfigInvalid, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str(), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) { values_[key] = value; }

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::ConfigInvalid, "expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string RunConfig::require(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) throw Error(ErrorKind::ConfigInvalid, "missing required setting '" + key + "'");
  return it->second;
}

long RunConfig::get_int(const std::string& key, long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& s = it->second;
  // Accept integral scientific notation such as 2e6.
  if (s.find_first_of("eE.") != std::string::npos) {
    const double d = get_double(key, 0.0);
    if (d != static_cast<double>(static_cast<long>(d))) bad_value(key, s, "an integer");
    return static_cast<long>(d);
  }
  long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) bad_value(key, s, "an integer");
  return v;
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& s = it->second;
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) bad_value(key, s, "a non-negative integer");
  return v;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) bad_value(key, it->second, "a number");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, it->second, "a number");
  }
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& s = it->second;
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, s, "a boolean");
}

std::vector<double> RunConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      bad_value(key, it->second, "a comma-separated list of numbers");
    }
  }
  return out;
}

template <typename T>
void RunConfig::resolve(const std::string& key, const T& value) {
  std::ostringstream os;
  if constexpr (std::is_same_v<T, bool>) {
    os << (value ? "true" : "false");
  } else if constexpr (std::is_floating_point_v<T>) {
    os.precision(17);
    os << value;
  } else {
    os << value;
  }
  values_[key] = os.str();
}

template void RunConfig::resolve<bool>(const std::string&, const bool&);
template void RunConfig::resolve<int>(const std::string&, const int&);
template void RunConfig::resolve<long>(const std::string&, const long&);
template void RunConfig::resolve<unsigned long>(const std::string&, const unsigned long&);
template void RunConfig::resolve<double>(const std::string&, const double&);
template void RunConfig::resolve<std::string>(const std::string&, const std::string&);

void RunConfig::check_keys(std::span<const std::string> allowed) const {
  for (const auto& [k, v] : values_) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw Error(ErrorKind::ConfigInvalid, "unknown setting '" + k + "'");
    }
  }
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::write(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  os << to_text();
}

int exit_code_for(int error_kind) {
  switch (static_cast<ErrorKind>(error_kind)) {
    case ErrorKind::ConfigInvalid:
      return 2;
    case ErrorKind::PointAtInfinity:
    case ErrorKind::DegenerateCorners:
    case ErrorKind::SingularMatrix:
    case ErrorKind::NonFinite:
      return 4;
    default:
      return 3;
  }
}

}  // namespace hmgdyn::cli
