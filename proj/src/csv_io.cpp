#include "hdmed/csv_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hdmed/error.hpp"

namespace hdmed {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell += ch;
    }
  }
  out.push_back(trim(cell));
  return out;
}

}  // namespace

int Table::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<int>(j);
  return -1;
}

Table parse_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  Table t;
  int lineno = 0;
  bool have_header = false;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    if (!have_header) {
      std::set<std::string> seen;
      for (const auto& c : cells) {
        if (c.empty()) throw ParseError(source + ": empty column name in header");
        if (!seen.insert(c).second) throw ParseError(source + ": duplicate column '" + c + "'");
      }
      t.header = cells;
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      throw ParseError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                       " fields, found " + std::to_string(cells.size()));
    std::vector<double> row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const std::string& c = cells[j];
      char* end = nullptr;
      errno = 0;
      const double v = c.empty() ? NAN : std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size() || !std::isfinite(v))
        throw ParseError(source + ":" + std::to_string(lineno) + ": column '" + t.header[j] +
                         "' has non-numeric or missing value '" + c + "'");
      row[j] = v;
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw ParseError(source + ": empty file (a header row is required)");
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return t;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw IoError("error reading '" + path + "'");
  return ss.str();
}

Table read_csv(const std::string& path) { return parse_csv(read_file(path), path); }

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + tmp.string() + "' for writing");
    f << contents;
    f.flush();
    if (!f) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("error writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into '" + path + "'");
  }
}

namespace {

MatrixXd pick(const Table& t, const std::vector<int>& cols) {
  MatrixXd m(t.values.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = t.values.col(cols[k]);
  return m;
}

int require(const Table& t, const std::string& name) {
  const int j = t.column(name);
  if (j < 0) throw DataError("column '" + name + "' not found");
  return j;
}

}  // namespace

Dataset dataset_from_table(const Table& t, const SingleFileSpec& spec) {
  std::set<int> used;
  const int y = require(t, spec.outcome);
  used.insert(y);
  std::vector<int> s_cols, z_cols, g_cols;
  for (const auto& name : spec.exposures) {
    const int j = require(t, name);
    if (!used.insert(j).second) throw DataError("column '" + name + "' assigned twice");
    s_cols.push_back(j);
  }
  for (const auto& name : spec.covariates) {
    const int j = require(t, name);
    if (!used.insert(j).second) throw DataError("column '" + name + "' assigned twice");
    z_cols.push_back(j);
  }
  for (int j = 0; j < static_cast<int>(t.header.size()); ++j)
    if (!used.count(j)) g_cols.push_back(j);
  if (s_cols.empty()) throw DataError("no exposure columns");
  if (g_cols.empty()) throw DataError("no mediator columns left after outcome, exposures and covariates");

  Dataset d;
  d.y = t.values.col(y);
  d.s = pick(t, s_cols);
  d.g = pick(t, g_cols);
  if (!z_cols.empty()) d.z = pick(t, z_cols);
  return d;
}

Dataset dataset_from_tables(const Table& outcome, const Table& mediators, const Table& exposures,
                            const Table* covariates) {
  if (outcome.values.cols() != 1) throw DataError("outcome file must have exactly one column");
  const auto n = outcome.values.rows();
  if (mediators.values.rows() != n || exposures.values.rows() != n || (covariates && covariates->values.rows() != n))
    throw DataError("input files have different row counts");
  Dataset d;
  d.y = outcome.values.col(0);
  d.g = mediators.values;
  d.s = exposures.values;
  if (covariates) d.z = covariates->values;
  return d;
}

}  // namespace hdmed
