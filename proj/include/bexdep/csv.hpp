// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "bexdep/copula.hpp"
#include "bexdep/kl.hpp"
#include "bexdep/matrix.hpp"
#include "bexdep/simulate.hpp"

namespace bexdep {

/// Input error carrying the 1-based line number of the offending row.
class CsvError : public std::runtime_error {
 public:
  CsvError(std::string file, std::size_t line, const std::string& what)
      : std::runtime_error(file + " line " + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// Shortest round-trip decimal form; locale-free, byte-stable across runs.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline double parse_field(std::string_view field, const std::string& file, std::size_t line) {
  // trim spaces and a trailing carriage return
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() &&
         (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
    field.remove_suffix(1);
  }
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw CsvError(file, line, "non-numeric cell '" + std::string(field) + "'");
  }
  return v;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError(path, 0, "cannot open file");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  // drop trailing blank lines
  while (!lines.empty() && (lines.back().empty() || lines.back() == "\r")) lines.pop_back();
  return lines;
}

}  // namespace detail

struct CsvMatrix {
  std::vector<std::string> header;
  Matrix values;
};

/// Reads a matrix CSV: one header row, then n numeric rows.
inline CsvMatrix read_matrix_csv(const std::string& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw CsvError(path, 1, "missing header row");
  CsvMatrix out;
  for (auto f : detail::split_csv_line(lines[0])) {
    std::string name(f);
    while (!name.empty() && name.back() == '\r') name.pop_back();
    out.header.push_back(name);
  }
  const std::size_t cols = out.header.size();
  const std::size_t rows = lines.size() - 1;
  if (rows == 0) throw CsvError(path, 2, "no data rows");
  out.values = Matrix(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto fields = detail::split_csv_line(lines[i + 1]);
    if (fields.size() != cols) {
      throw CsvError(path, i + 2,
                     "expected " + std::to_string(cols) + " fields, got " +
                         std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < cols; ++j) {
      out.values(i, j) = detail::parse_field(fields[j], path, i + 2);
    }
  }
  return out;
}

inline void write_matrix_csv(std::ostream& os, const std::vector<std::string>& header,
                             const Matrix& m) {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) os << ',';
    os << header[j];
  }
  os << '\n';
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

inline void write_matrix_csv(const std::string& path, const std::vector<std::string>& header,
                             const Matrix& m) {
  std::ofstream os(path);
  if (!os) throw CsvError(path, 0, "cannot open file for writing");
  write_matrix_csv(os, header, m);
}

/// CurveSet CSV: first row = grid points, subsequent rows = curve values.
inline CurveSet read_curveset_csv(const std::string& path) {
  const auto lines = detail::read_lines(path);
  if (lines.size() < 2) throw CsvError(path, 1, "need a grid row and at least one curve");
  const auto grid_fields = detail::split_csv_line(lines[0]);
  std::vector<double> grid;
  grid.reserve(grid_fields.size());
  for (auto f : grid_fields) grid.push_back(detail::parse_field(f, path, 1));
  const std::size_t m = grid.size();
  Matrix curves(lines.size() - 1, m);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = detail::split_csv_line(lines[i]);
    if (fields.size() != m) {
      throw CsvError(path, i + 1,
                     "expected " + std::to_string(m) + " fields, got " +
                         std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < m; ++j) {
      curves(i - 1, j) = detail::parse_field(fields[j], path, i + 1);
    }
  }
  try {
    return make_curveset(std::move(grid), std::move(curves));
  } catch (const std::invalid_argument& e) {
    throw CsvError(path, 1, e.what());
  }
}

inline void write_curveset_csv(std::ostream& os, const CurveSet& cs) {
  for (std::size_t j = 0; j < cs.grid.size(); ++j) {
    if (j) os << ',';
    os << format_double(cs.grid[j]);
  }
  os << '\n';
  for (std::size_t i = 0; i < cs.curves.rows; ++i) {
    for (std::size_t j = 0; j < cs.curves.cols; ++j) {
      if (j) os << ',';
      os << format_double(cs.curves(i, j));
    }
    os << '\n';
  }
}

/// Scores CSV with header Z1..Zk.
inline void write_scores_csv(std::ostream& os, const Matrix& scores) {
  std::vector<std::string> header;
  header.reserve(scores.cols);
  for (std::size_t j = 0; j < scores.cols; ++j) header.push_back("Z" + std::to_string(j + 1));
  write_matrix_csv(os, header, scores);
}

/// Power curve CSV, one row per (scenario, noise level).
inline void write_power_csv(std::ostream& os, const std::vector<PowerCurve>& curves) {
  os << "method,scenario,placement,noise_level,replicates,rejections,power\n";
  for (const auto& c : curves) {
    for (const auto& pt : c.points) {
      os << c.method << ',' << c.scenario << ',' << c.placement << ','
         << pt.noise_level << ',' << pt.replicates << ',' << pt.rejections << ','
         << format_double(pt.power) << '\n';
    }
  }
}

/// Debug view of a bit matrix: rows = observations, columns = depths.
inline void write_bits_csv(std::ostream& os, const BitMatrix& bits) {
  for (int d = 1; d <= bits.depth(); ++d) {
    if (d > 1) os << ',';
    os << 'd' << d;
  }
  os << '\n';
  for (std::size_t i = 0; i < bits.rows(); ++i) {
    for (int d = 1; d <= bits.depth(); ++d) {
      if (d > 1) os << ',';
      os << (bits.sign(i, d) > 0 ? "1" : "-1");
    }
    os << '\n';
  }
}

}  // namespace bexdep
