#pragma once

// Minimal CSV helpers. Doubles are written in scientific notation with 17
// significant digits so that values round-trip exactly.

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gausson/errors.hpp"

namespace gausson::csv {

inline std::string format(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

inline void write_header(std::ostream& os, const std::vector<std::string>& columns) {
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << '\n';
}

inline void write_row(std::ostream& os, const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << format(values[i]);
  os << '\n';
}

inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Header plus rows of string cells.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ConfigError("missing CSV column '" + std::string(name) + "'");
  }
};

inline Table read(std::istream& is) {
  Table t;
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty CSV input");
  t.header = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    t.rows.push_back(split(line));
    if (t.rows.back().size() != t.header.size()) throw ConfigError("ragged CSV row: " + line);
  }
  return t;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return read(in);
}

}  // namespace gausson::csv
