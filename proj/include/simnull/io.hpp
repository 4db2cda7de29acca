#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "simnull/errors.hpp"
#include "simnull/grid.hpp"

namespace simnull::io {

/// Shortest decimal that round-trips; "INF"/"-INF"/"NAN" for non-finite values.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "NAN";
  if (std::isinf(x)) return x > 0 ? "INF" : "-INF";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw NumericalError("format_double: conversion failed");
  return std::string(buf, ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "INF") return std::numeric_limits<double>::infinity();
  if (s == "-INF") return -std::numeric_limits<double>::infinity();
  double x = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  auto [ptr, ec] = std::from_chars(first, last, x);
  if (ec != std::errc() || ptr != last) throw InvalidArgument("not a number: '" + s + "'");
  return x;
}

/// Non-finite doubles become the strings "INF"/"-INF" (JSON has no infinity).
inline nlohmann::json json_number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

/// Writes to a sibling temp file, then renames over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_atomic(path, j.dump(2) + "\n");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) { row(header); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline void write_mask(const std::filesystem::path& path, const ControlRegion& region) {
  write_atomic(path, region.to_mask_string() + "\n");
}

inline ControlRegion read_mask(const std::filesystem::path& path, const Grid1D& grid) {
  return parse_mask_string(grid, read_file(path));
}

}  // namespace simnull::io
