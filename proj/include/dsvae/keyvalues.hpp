/*
 * Copyright 2026 The dsvae Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dsvae/error.hpp"

namespace dsvae {

/// Ordered `key = value` records. Blank lines and lines starting with '#'
/// are ignored; keys are unique. Consumers erase what they understand so
/// leftovers can be reported as unknown.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string s = trim(line);
      if (s.empty() || s[0] == '#') continue;
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
      }
      const std::string key = trim(s.substr(0, eq));
      if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
      if (kv.values_.contains(key)) throw ConfigError("duplicate key '" + key + "'");
      kv.values_[key] = trim(s.substr(eq + 1));
    }
    return kv;
  }

  static KeyValues load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool contains(const std::string& key) const { return values_.contains(key); }
  bool empty() const { return values_.empty(); }
  const std::map<std::string, std::string>& entries() const { return values_; }

  /// Removes and returns the value for `key` if present.
  bool take(const std::string& key, std::string& out) {
    auto it = values_.find(key);
    if (it == values_.end()) return false;
    out = it->second;
    values_.erase(it);
    return true;
  }

  template <typename Int>
  bool take_int(const std::string& key, Int& out) {
    std::string s;
    if (!take(key, s)) return false;
    Int v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
      throw ConfigError("key '" + key + "': expected an integer, got '" + s + "'");
    }
    out = v;
    return true;
  }

  bool take_double(const std::string& key, double& out) {
    std::string s;
    if (!take(key, s)) return false;
    try {
      std::size_t used = 0;
      out = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': expected a number, got '" + s + "'");
    }
    return true;
  }

  void expect_consumed(const std::string& what) const {
    if (values_.empty()) return;
    throw ConfigError("unknown " + what + " key '" + values_.begin()->first + "'");
  }

  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

 private:
  std::map<std::string, std::string> values_;
};

/// Shortest text that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace dsvae
