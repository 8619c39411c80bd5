#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace score {

// Flat "section.key" -> value store read from an INI-like text:
//
//   # comment
//   [train]
//   steps = 2000
//
// Keys before any section header live in the "global" section.
class Config {
 public:
  static Config parse(const std::string& text);  // throws ConfigError
  static Config load(const std::filesystem::path& path);

  // "section.key=value"
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get(const std::string& key, const std::string& fallback) const;
  double get(const std::string& key, double fallback) const;
  int get(const std::string& key, int fallback) const;
  std::uint64_t get(const std::string& key, std::uint64_t fallback) const;
  bool get(const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  // Keys never read through a getter, so typos can be reported.
  std::vector<std::string> unused_keys() const;
  std::vector<std::string> keys() const;

 private:
  const std::string* find(const std::string& key) const;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace score
