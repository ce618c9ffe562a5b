#include "floff/config.hpp"

#include <sstream>

namespace floff {

namespace {
std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}
}  // namespace

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(Err::invalid_argument,
                  "config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw Error(Err::invalid_argument,
                  "config line " + std::to_string(lineno) + ": empty key");
    c.map_[key] = value;
  }
  return c;
}

Config Config::load(const std::string& path) {
  auto raw = read_file(path);
  return parse(std::string(raw.begin(), raw.end()));
}

std::string Config::to_text() const {
  std::ostringstream out;
  for (const auto& [k, v] : map_) out << k << "=" << v << "\n";
  return out.str();
}

void Config::save(const std::string& path) const {
  auto text = to_text();
  write_file(path, Bytes(text.begin(), text.end()));
}

void Config::set(const std::string& key, const std::string& value) {
  if (trim(key).empty()) throw Error(Err::invalid_argument, "empty config key");
  map_[trim(key)] = trim(value);
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  auto it = map_.find(key);
  return it == map_.end() ? fallback : it->second;
}

std::string Config::require(const std::string& key) const {
  auto it = map_.find(key);
  if (it == map_.end())
    throw Error(Err::invalid_argument, "missing required config key: " + key);
  return it->second;
}

int64_t Config::get_i64(const std::string& key, int64_t fallback) const {
  auto it = map_.find(key);
  if (it == map_.end()) return fallback;
  return parse_i64(it->second);
}

uint64_t Config::get_u64(const std::string& key, uint64_t fallback) const {
  auto it = map_.find(key);
  if (it == map_.end()) return fallback;
  return parse_u64(it->second);
}

double Config::get_f64(const std::string& key, double fallback) const {
  auto it = map_.find(key);
  if (it == map_.end()) return fallback;
  return parse_double(it->second);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = map_.find(key);
  if (it == map_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(Err::invalid_argument, "config key " + key + ": not a boolean: " + v);
}

}  // namespace floff
