#include "moma/harness/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "moma/common.hpp"

namespace moma::harness {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  Config cfg;
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    cfg.entries_[key] = value;
  }
  return cfg;
}

Config Config::from_pairs(const std::vector<std::string>& pairs) {
  Config cfg;
  for (const std::string& pair : pairs) {
    const std::size_t eq = pair.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override '" + pair + "' is not of the form key=value");
    cfg.entries_[trim(pair.substr(0, eq))] = trim(pair.substr(eq + 1));
  }
  return cfg;
}

bool Config::has(const std::string& key) const { return entries_.count(key) > 0; }

void Config::set(const std::string& key, std::string value) {
  entries_[key] = std::move(value);
}

std::string Config::str(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

std::string Config::str(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

long long Config::integer(const std::string& key) const {
  const std::string v = str(key);
  char* end = nullptr;
  const long long out = std::strtoll(v.c_str(), &end, 10);
  if (end == nullptr || *end != '\0' || v.empty())
    throw ConfigError("config key '" + key + "' is not an integer: '" + v + "'");
  return out;
}

long long Config::integer(const std::string& key, long long fallback) const {
  return has(key) ? integer(key) : fallback;
}

double Config::real(const std::string& key) const {
  const std::string v = str(key);
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (end == nullptr || *end != '\0' || v.empty())
    throw ConfigError("config key '" + key + "' is not a number: '" + v + "'");
  return out;
}

double Config::real(const std::string& key, double fallback) const {
  return has(key) ? real(key) : fallback;
}

bool Config::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = str(key);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<int> Config::int_list(const std::string& key, const std::vector<int>& fallback) const {
  if (!has(key)) return fallback;
  const std::string v = str(key);
  std::vector<int> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const std::string item = trim(tok);
    char* end = nullptr;
    const long long x = std::strtoll(item.c_str(), &end, 10);
    if (end == nullptr || *end != '\0' || item.empty())
      throw ConfigError("config key '" + key + "' has a non-integer entry: '" + item + "'");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

void Config::merge(const Config& overrides) {
  for (const auto& [k, v] : overrides.entries_) entries_[k] = v;
}

std::string Config::canonical(const std::vector<std::string>& exclude) const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    bool skip = false;
    for (const std::string& e : exclude) skip = skip || e == k;
    if (skip) continue;
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::string Config::hash(const std::vector<std::string>& exclude) const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(canonical(exclude))));
  return std::string(buf);
}

void apply_env_overrides(Config& cfg) {
  if (const char* seed = std::getenv("MOMA_SEED"); seed != nullptr && *seed != '\0')
    cfg.set("seed", seed);
}

}  // namespace moma::harness
