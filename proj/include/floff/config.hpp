#pragma once

#include <map>
#include <string>

#include "floff/util.hpp"

namespace floff {

// Flat UTF-8 key=value configuration with full-line # comments. Keys are
// kept sorted so serialization is deterministic.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  std::string to_text() const;
  void save(const std::string& path) const;

  bool has(const std::string& key) const { return map_.count(key) != 0; }
  void set(const std::string& key, const std::string& value);
  void erase(const std::string& key) { map_.erase(key); }

  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;

  int64_t get_i64(const std::string& key, int64_t fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  double get_f64(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return map_; }

 private:
  std::map<std::string, std::string> map_;
};

}  // namespace floff
