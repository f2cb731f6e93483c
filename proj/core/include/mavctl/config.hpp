#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mavctl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` file with `#` comments. Dotted keys group settings by
/// module (e.g. wind.mean_force_x).
class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_vector(const std::string& key,
                                 const std::vector<double>& fallback) const;

  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace mavctl
