#pragma once

#include <string>
#include <vector>

#include "atme/dataset.hpp"

namespace atme::cli {

struct CsvTable {
  std::vector<std::string> header;
  /// Raw cell text, row-major; empty string = blank cell.
  std::vector<std::vector<std::string>> rows;
};

/// Reads a UTF-8, comma-separated file with a header row. Parse errors
/// carry (row, column) coordinates.
CsvTable read_csv_table(const std::string& path);

/// Reads and binds in one step. Blank or non-numeric cells in role
/// columns become NaN and are then rejected or dropped per `opts`.
Dataset read_csv(const std::string& path, const RoleMap& roles,
                 const BindOptions& opts = {});

/// Writes a dataset back out (column order: roles, covariates, cluster).
void write_csv(const Dataset& ds, const std::string& path);

}  // namespace atme::cli
