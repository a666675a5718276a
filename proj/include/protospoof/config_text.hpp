// Copyright 2026 The protospoof Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal "[section]" / "key = value" reader. '#' and ';' start comments.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "protospoof/error.hpp"

namespace protospoof::config {

struct Entry {
  std::string value;
  std::size_t line = 0;
};

/// Keys are "section.key"; keys before any section header use no prefix.
using Document = std::map<std::string, Entry>;

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline Document parse(std::string_view text) {
  Document doc;
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto c = line.find_first_of("#;"); c != std::string_view::npos) line = line.substr(0, c);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (doc.contains(full))
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + full + "' repeated (first on line " +
                        std::to_string(doc[full].line) + ")");
    doc[full] = Entry{std::string(trim(line.substr(eq + 1))), line_no};
  }
  return doc;
}

inline std::string where(const std::string& key, const Entry& e) {
  return "line " + std::to_string(e.line) + ": key '" + key + "'";
}

inline double to_double(const std::string& key, const Entry& e) {
  double v = 0.0;
  const char* b = e.value.data();
  const char* end = b + e.value.size();
  const auto [p, ec] = std::from_chars(b, end, v);
  if (ec != std::errc{} || p != end || !std::isfinite(v))
    throw ConfigError(where(key, e) + " expects a finite number, got '" + e.value + "'");
  return v;
}

inline std::uint64_t to_uint(const std::string& key, const Entry& e) {
  std::uint64_t v = 0;
  const char* b = e.value.data();
  const char* end = b + e.value.size();
  const auto [p, ec] = std::from_chars(b, end, v);
  if (ec != std::errc{} || p != end)
    throw ConfigError(where(key, e) + " expects a non-negative integer, got '" + e.value + "'");
  return v;
}

inline std::vector<double> to_double_list(const std::string& key, const Entry& e) {
  std::vector<double> out;
  std::string_view rest = e.value;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string item(trim(rest.substr(0, comma)));
    out.push_back(to_double(key, Entry{item, e.line}));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

}  // namespace protospoof::config
