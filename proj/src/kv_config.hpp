// Copyright 2026  The xmalign authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef XMALIGN_SRC_KV_CONFIG_HPP_
#define XMALIGN_SRC_KV_CONFIG_HPP_

#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>

#include "xmalign/errors.hpp"

namespace xmalign::internal {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Flat "key = value" file body; '#' lines and blanks ignored.
inline std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(lineno) +
                            " is not key = value: " + t);
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw ValidationError("config line " + std::to_string(lineno) +
                            " has empty key");
    }
    if (kv.count(key)) {
      throw ValidationError("duplicate config key: " + key);
    }
    kv[key] = value;
  }
  return kv;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ValidationError("config key " + key + ": not a number: " + v);
  }
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ValidationError("config key " + key +
                          ": not a non-negative integer: " + v);
  }
  return x;
}

inline std::uint32_t to_u32(const std::string& key, const std::string& v) {
  std::uint64_t x = to_u64(key, v);
  if (x > 0xffffffffULL) {
    throw ValidationError("config key " + key + ": value too large: " + v);
  }
  return static_cast<std::uint32_t>(x);
}

// After consuming known keys, anything left is unknown.
inline void reject_unknown(const std::map<std::string, std::string>& kv) {
  if (!kv.empty()) {
    throw ValidationError("unknown config key: " + kv.begin()->first);
  }
}

}  // namespace xmalign::internal

#endif  // XMALIGN_SRC_KV_CONFIG_HPP_
