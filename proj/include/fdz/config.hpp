#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace fdz {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Plain-text `key = value` configuration. '#' starts a comment; blank lines
// are ignored. Keys are tracked on access so unrecognized keys can be
// reported as errors.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text, const std::string& origin = "<memory>");

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const;

  // Throws config_error when any key was never read.
  void reject_unknown_keys() const;

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> accessed_;
};

}  // namespace fdz
