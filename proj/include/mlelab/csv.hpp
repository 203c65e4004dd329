#ifndef MLELAB_CSV_HPP
#define MLELAB_CSV_HPP

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mlelab/errors.hpp"
#include "mlelab/linalg.hpp"

namespace mlelab {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column_index(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    throw ParseError("column '" + name + "' not found");
  }

  bool has_column(const std::string& name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace detail

/// Plain comma-separated table with a header row. Cells are not quoted.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file '" + path + "'");
  table.header = detail::split_csv_line(line);
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != table.header.size())
      throw ParseError("ragged row in '" + path + "' (expected " +
                       std::to_string(table.header.size()) + " cells, got " +
                       std::to_string(cells.size()) + ")");
    table.rows.push_back(std::move(cells));
  }
  if (table.rows.empty()) throw ParseError("no data rows in '" + path + "'");
  return table;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw ParseError("");
    return v;
  } catch (...) {
    throw ParseError("cannot parse '" + s + "' as a number (" + what + ")");
  }
}

/// A parsed regression dataset: feature matrix, response vector, optional
/// id column carried through to predictions.
struct Dataset {
  Matrix x;
  Vec y;
  std::vector<std::string> feature_names;
  std::vector<std::string> ids;  // empty if no id column
};

inline Dataset load_dataset(const std::string& path, const std::string& response,
                            const std::string& id_column = "") {
  const CsvTable table = read_csv(path);
  const std::size_t y_col = table.column_index(response);
  std::size_t id_col = static_cast<std::size_t>(-1);
  if (!id_column.empty()) id_col = table.column_index(id_column);

  Dataset ds;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (j == y_col || j == id_col) continue;
    ds.feature_names.push_back(table.header[j]);
  }
  if (ds.feature_names.empty()) throw ParseError("dataset has no feature columns");

  ds.x = Matrix(table.rows.size(), ds.feature_names.size());
  ds.y.resize(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    std::size_t f = 0;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      if (j == id_col) {
        continue;
      } else if (j == y_col) {
        ds.y[i] = parse_double(table.rows[i][j], "response row " + std::to_string(i + 1));
      } else {
        ds.x(i, f++) =
            parse_double(table.rows[i][j], "feature row " + std::to_string(i + 1));
      }
    }
    if (id_col != static_cast<std::size_t>(-1)) ds.ids.push_back(table.rows[i][id_col]);
  }
  return ds;
}

/// Load feature matrix only (no response column), for prediction inputs.
inline Dataset load_features(const std::string& path, const std::string& id_column = "") {
  const CsvTable table = read_csv(path);
  std::size_t id_col = static_cast<std::size_t>(-1);
  if (!id_column.empty()) id_col = table.column_index(id_column);

  Dataset ds;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (j == id_col) continue;
    ds.feature_names.push_back(table.header[j]);
  }
  if (ds.feature_names.empty()) throw ParseError("dataset has no feature columns");
  ds.x = Matrix(table.rows.size(), ds.feature_names.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    std::size_t f = 0;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      if (j == id_col) continue;
      ds.x(i, f++) = parse_double(table.rows[i][j], "feature row " + std::to_string(i + 1));
    }
    if (id_col != static_cast<std::size_t>(-1)) ds.ids.push_back(table.rows[i][id_col]);
  }
  return ds;
}

}  // namespace mlelab

#endif  // MLELAB_CSV_HPP
