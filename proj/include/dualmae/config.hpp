#pragma once

#include <map>
#include <string>
#include <vector>

#include "dualmae/errors.hpp"

namespace dualmae {

struct ConfigKey {
  std::string key;
  std::string def;  // "auto" resolves per stage/variant
  std::string help;
};

// Flat key=value configuration: `key = value` lines, '#' comments, no
// sections. Unknown keys are an error; overrides apply after the file.
class Config {
 public:
  static const std::vector<ConfigKey>& schema();
  static std::string help_text();

  static Config defaults();
  static Config load(const std::string& path, const std::vector<std::string>& overrides);

  const std::string& raw(const std::string& key) const;
  bool is_auto(const std::string& key) const { return raw(key) == "auto"; }

  std::string get_string(const std::string& key) const;
  int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  // stage-resolved accessors with an explicit fallback for "auto"
  int64_t get_int_or(const std::string& key, int64_t fallback) const;
  double get_double_or(const std::string& key, double fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value);

  // key=value snapshot of every resolved entry, schema order
  std::string snapshot() const;

  // "name:value,name:value" pairs
  std::map<std::string, int64_t> get_overrides(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace dualmae
