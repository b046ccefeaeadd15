#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "stmala/types.hpp"

namespace stmala {

// All CSV output uses ',' separators, '.' decimals, LF line endings and
// shortest-exact doubles (%.17g), so every file round-trips bit-exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

// Matrix CSV: one matrix row per line, no header.
inline void write_matrix_csv(std::ostream& os, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

inline void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_matrix_csv(os, m);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline Matrix read_matrix_csv(std::istream& is, const std::string& what = "<stream>") {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t width = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (width == 0) {
      width = cells.size();
    } else if (cells.size() != width) {
      throw std::runtime_error("ragged CSV row in " + what);
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &pos);
      } catch (const std::exception&) {
        pos = std::string::npos;
      }
      if (pos != c.size()) throw std::runtime_error("bad numeric cell '" + c + "' in " + what);
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty matrix CSV: " + what);
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

inline Matrix read_matrix_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  return read_matrix_csv(is, path);
}

// Tabular CSV with a header row, used by the harness artifacts.
class TableWriter {
 public:
  TableWriter(const std::string& path, const std::vector<std::string>& columns)
      : os_(path, std::ios::binary) {
    if (!os_) throw std::runtime_error("cannot open for writing: " + path);
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (j > 0) os_ << ',';
      os_ << columns[j];
    }
    os_ << '\n';
    width_ = columns.size();
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw std::invalid_argument("table row width mismatch");
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j > 0) os_ << ',';
      os_ << cells[j];
    }
    os_ << '\n';
  }

 private:
  std::ofstream os_;
  std::size_t width_;
};

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

inline Table read_table_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  Table t;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty table CSV: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.columns = split_csv_line(line);
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.columns.size()) throw std::runtime_error("ragged table CSV: " + path);
    t.rows.push_back(std::move(cells));
  }
  return t;
}

}  // namespace stmala
