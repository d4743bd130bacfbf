#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace moma::harness {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key=value configuration. Files hold one `key = value` pair per line;
/// blank lines and lines starting with '#' are ignored. Values are plain
/// strings until a typed accessor parses them; typed accessors throw
/// ConfigError on malformed values or (for the default-less overloads)
/// missing keys.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  /// Parses "key=value" tokens (CLI overrides).
  static Config from_pairs(const std::vector<std::string>& pairs);

  bool has(const std::string& key) const;
  void set(const std::string& key, std::string value);

  std::string str(const std::string& key) const;
  std::string str(const std::string& key, const std::string& fallback) const;
  long long integer(const std::string& key) const;
  long long integer(const std::string& key, long long fallback) const;
  double real(const std::string& key) const;
  double real(const std::string& key, double fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  /// Comma-separated integers, e.g. "256,256". An empty value -> empty list.
  std::vector<int> int_list(const std::string& key, const std::vector<int>& fallback) const;

  void merge(const Config& overrides);  // overrides win
  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// "key=value\n" lines in sorted key order; keys in `exclude` are dropped.
  std::string canonical(const std::vector<std::string>& exclude = {}) const;
  /// FNV-1a hex digest of canonical(exclude).
  std::string hash(const std::vector<std::string>& exclude = {}) const;

 private:
  std::map<std::string, std::string> entries_;
};

/// Applies process-environment overrides: MOMA_SEED replaces "seed".
void apply_env_overrides(Config& cfg);

}  // namespace moma::harness
