#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "machlab/errors.hpp"

namespace machlab {

/// Plain-text `key = value` configuration. Lines starting with `#` are
/// comments; keys may carry dotted section prefixes (`geometry.n_r`). A lookup
/// of `section.key` falls back to the bare `key`.
class Config {
 public:
  Config() = default;

  static Config parse(std::string_view text) {
    Config cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        fail(ErrorKind::config, "line " + std::to_string(lineno) + ": expected `key = value`");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) fail(ErrorKind::config, "line " + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::config, "cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  bool has(const std::string& key) const { return find(key).has_value(); }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto v = find(key);
    return v ? *v : fallback;
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = find(key);
    return v ? to_double(key, *v) : fallback;
  }

  int get_int(const std::string& key, int fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    int out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || ptr != v->data() + v->size())
      fail(ErrorKind::config, "key '" + key + "': expected integer, got '" + *v + "'");
    return out;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    fail(ErrorKind::config, "key '" + key + "': expected boolean, got '" + *v + "'");
  }

  /// Comma- or whitespace-separated list of numbers.
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const auto& tok : split(*v, ", \t")) out.push_back(to_double(key, tok));
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

  static std::vector<std::string> split(const std::string& s, std::string_view seps) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (seps.find(c) != std::string_view::npos) {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  }

 private:
  std::optional<std::string> find(const std::string& key) const {
    if (auto it = values_.find(key); it != values_.end()) return it->second;
    if (auto dot = key.rfind('.'); dot != std::string::npos) {
      if (auto it = values_.find(key.substr(dot + 1)); it != values_.end()) return it->second;
    }
    return std::nullopt;
  }

  static double to_double(const std::string& key, const std::string& s) {
    try {
      std::size_t used = 0;
      double d = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return d;
    } catch (const std::exception&) {
      fail(ErrorKind::config, "key '" + key + "': expected number, got '" + s + "'");
    }
  }

  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace machlab
