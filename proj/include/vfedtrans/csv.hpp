/*
 * Copyright 2026 The VFedTrans Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef VFEDTRANS_CSV_HPP_
#define VFEDTRANS_CSV_HPP_

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vfedtrans/error.hpp"
#include "vfedtrans/linalg.hpp"

namespace vfedtrans::csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

// Comma split with double-quoted fields; embedded quotes are doubled ("").
inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.emplace_back(trim(cur));
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Shortest round-trip representation.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string escape(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file " + path.string());
  Table t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (!have_header) {
      if (!fields.empty() && fields[0].size() >= 3 &&
          fields[0].compare(0, 3, "\xEF\xBB\xBF") == 0) {
        fields[0].erase(0, 3);
      }
      t.header = std::move(fields);
      have_header = true;
    } else {
      t.rows.push_back(std::move(fields));
    }
  }
  if (!have_header) throw DataError(path.string() + ": no header row");
  return t;
}

inline void write_file(const std::filesystem::path& path, const Table& t) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write CSV file " + path.string());
  auto emit = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << escape(fields[i]);
    }
    out << '\n';
  };
  emit(t.header);
  for (const auto& r : t.rows) emit(r);
}

// Matrix with an optional leading id column.
inline Table matrix_table(const Matrix& m, std::span<const std::string> col_names,
                          std::span<const std::string> ids = {}) {
  Table t;
  if (!ids.empty()) t.header.push_back("id");
  for (std::size_t j = 0; j < m.cols(); ++j)
    t.header.push_back(j < col_names.size() ? col_names[j] : "c" + std::to_string(j));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::vector<std::string> r;
    if (!ids.empty()) r.push_back(ids[i]);
    for (double v : m.row(i)) r.push_back(format_double(v));
    t.rows.push_back(std::move(r));
  }
  return t;
}

}  // namespace vfedtrans::csv

#endif  // VFEDTRANS_CSV_HPP_
