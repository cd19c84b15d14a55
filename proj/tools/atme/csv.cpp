#include "atme/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace atme::cli {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

CsvTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("empty file '" + path + "'");
  for (auto& h : split_line(line)) table.header.push_back(strip(h));

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (strip(line).empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != table.header.size())
      throw ValidationError("row " + std::to_string(row) + ": expected " +
                            std::to_string(table.header.size()) +
                            " cells, got " + std::to_string(cells.size()));
    for (auto& c : cells) c = strip(c);
    table.rows.push_back(std::move(cells));
  }
  return table;
}

Dataset read_csv(const std::string& path, const RoleMap& roles,
                 const BindOptions& opts) {
  const CsvTable table = read_csv_table(path);

  std::vector<std::string> names = table.header;
  std::vector<std::vector<double>> columns(names.size());
  std::vector<std::string> cluster_labels;
  std::size_t cluster_col = names.size();
  if (!roles.cluster.empty()) {
    for (std::size_t j = 0; j < names.size(); ++j)
      if (names[j] == roles.cluster) cluster_col = j;
    if (cluster_col == names.size())
      throw ValidationError("missing cluster column '" + roles.cluster + "'");
  }

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      const std::string& cell = table.rows[r][j];
      if (j == cluster_col) {
        cluster_labels.push_back(cell);
        columns[j].push_back(0.0);
        continue;
      }
      if (cell.empty()) {
        columns[j].push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        // non-numeric in a role column is a hard error with coordinates
        const bool is_role =
            names[j] == roles.outcome || names[j] == roles.treatment ||
            names[j] == roles.moderator ||
            std::find(roles.covariates.begin(), roles.covariates.end(),
                      names[j]) != roles.covariates.end();
        if (is_role)
          throw ValidationError("parse failure at row " +
                                std::to_string(r + 2) + ", column '" +
                                names[j] + "'");
        columns[j].push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      columns[j].push_back(v);
    }
  }

  return bind_dataset(names, columns, roles, opts,
                      roles.cluster.empty() ? nullptr : &cluster_labels);
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << "y,t,s";
  for (const auto& c : ds.covariate_names) out << "," << c;
  if (ds.cluster) out << ",cluster";
  out << "\n";
  char buf[64];
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", ds.y[i]);
    out << buf << "," << ds.t[i] << "," << ds.s[i];
    for (Eigen::Index j = 0; j < ds.k(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.x(i, j));
      out << "," << buf;
    }
    if (ds.cluster) out << "," << (*ds.cluster)[static_cast<std::size_t>(i)];
    out << "\n";
  }
}

}  // namespace atme::cli
