#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cdjp/error.hpp"

namespace cdjp::cli {

// Flat `key = value` file: '#' starts a comment, values may be quoted,
// [section] headers prefix the keys that follow as "section.key".
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& origin = "<config>") {
    KeyValues kv;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      line = strip(strip_comment(line));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(Errc::Config, origin + ":" + std::to_string(lineno) + ": bad section header");
        section = strip(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(Errc::Config, origin + ":" + std::to_string(lineno) + ": expected key = value");
      auto key = strip(line.substr(0, eq));
      if (key.empty()) fail(Errc::Config, origin + ":" + std::to_string(lineno) + ": empty key");
      if (!section.empty()) key = section + "." + key;
      kv.values_[key] = unquote(strip(line.substr(eq + 1)));
    }
    return kv;
  }

  static KeyValues load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::Io, "cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  /// Applies a "key=value" override.
  void set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) fail(Errc::Config, "override must be key=value: " + assignment);
    values_[strip(assignment.substr(0, eq))] = unquote(strip(assignment.substr(eq + 1)));
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string str(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  std::string required(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end() || it->second.empty()) fail(Errc::Config, "config key '" + key + "' is required");
    return it->second;
  }
  double real(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(values_.at(key), &used);
      if (used != values_.at(key).size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      fail(Errc::Config, "config key '" + key + "' is not a number: " + values_.at(key));
    }
  }
  long long integer(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(values_.at(key), &used);
      if (used != values_.at(key).size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      fail(Errc::Config, "config key '" + key + "' is not an integer: " + values_.at(key));
    }
  }
  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(str(key, ""));
    while (std::getline(in, item, ','))
      if (auto s = unquote(strip(item)); !s.empty()) out.push_back(s);
    return out;
  }

 private:
  static std::string strip(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }
  static std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }
  static std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace cdjp::cli
