#pragma once

#include <string>
#include <vector>

#include "hdmed/core_stats.hpp"

namespace hdmed {

// Numeric table with a header row.
struct Table {
  std::vector<std::string> header;
  MatrixXd values;  // rows x header.size()

  int column(const std::string& name) const;  // -1 when absent
};

// Parses comma-separated text. Every cell must be a finite number; empty
// cells, NA and the like are rejected with ParseError.
Table parse_csv(const std::string& text, const std::string& source = "<input>");
Table read_csv(const std::string& path);

std::string read_file(const std::string& path);

// Writes through a temporary sibling file and renames it into place, so a
// failed run never leaves a partial file behind.
void write_file_atomic(const std::string& path, const std::string& contents);

// One table: the named outcome, exposure and covariate columns; every other
// column is a mediator.
struct SingleFileSpec {
  std::string outcome = "Y";
  std::vector<std::string> exposures{"S"};
  std::vector<std::string> covariates;
};

Dataset dataset_from_table(const Table& t, const SingleFileSpec& spec);

// Separate tables for the outcome (one column), mediators, exposures and
// optional covariates. Row counts must agree.
Dataset dataset_from_tables(const Table& outcome, const Table& mediators, const Table& exposures,
                            const Table* covariates);

}  // namespace hdmed
