#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "atme/errors.hpp"

namespace atme {

/// Validated analysis table: outcome y, binary treatment t, binary
/// moderator s, covariate matrix x (n x k), optional cluster labels.
/// Immutable after construction; safe to share across threads.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::VectorXi t;
  Eigen::VectorXi s;
  Eigen::MatrixXd x;
  std::vector<std::string> covariate_names;
  std::optional<std::vector<std::string>> cluster;

  /// Row indices into the table this dataset was derived from.
  /// Identity permutation for freshly bound data.
  std::vector<std::size_t> source_rows;

  /// Rows removed by the drop-missing option at bind time.
  std::size_t dropped_rows = 0;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index k() const { return x.cols(); }
};

enum class Method {
  SubsetDifference,
  ControlledInteraction,
  ParallelRegression,
  FullInteraction,
  ParallelMatching,
  PropensityWeighting,
};

std::string method_name(Method m);

struct CellCounts {
  std::size_t t0s0 = 0;
  std::size_t t0s1 = 0;
  std::size_t t1s0 = 0;
  std::size_t t1s1 = 0;

  bool any_empty() const {
    return t0s0 == 0 || t0s1 == 0 || t1s0 == 0 || t1s1 == 0;
  }
};

CellCounts count_cells(const Dataset& ds);

/// Per-treatment-subset moderator coefficients for parallel methods.
struct SubsetComponents {
  double gamma0 = 0.0;
  double var0 = 0.0;
  double gamma1 = 0.0;
  double var1 = 0.0;
};

struct EstimateResult {
  Method method;
  double estimate = 0.0;
  double variance = 0.0;
  double std_error = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double level = 0.95;
  std::optional<SubsetComponents> subset_components;
  CellCounts cell_counts;
  std::map<std::string, std::string> diagnostics;
};

/// Fills std_error and the normal-approximation CI from estimate/variance.
void finalize_result(EstimateResult& r, double level);

struct RoleMap {
  std::string outcome;
  std::string treatment;
  std::string moderator;
  std::vector<std::string> covariates;
  std::string cluster;  // empty = no clustering
};

struct BindOptions {
  /// Drop rows with non-finite values instead of rejecting the input.
  bool drop_missing = false;
};

/// Binds named numeric columns to analysis roles and validates the
/// result (binary t/s, both arms present, finite values, equal lengths).
/// `cluster_labels`, when provided, must parallel the numeric columns.
Dataset bind_dataset(const std::vector<std::string>& names,
                     const std::vector<std::vector<double>>& columns,
                     const RoleMap& roles, const BindOptions& opts = {},
                     const std::vector<std::string>* cluster_labels = nullptr);

/// Partition by treatment level, preserving row order within each part.
/// Returns (T=0 subset, T=1 subset).
std::pair<Dataset, Dataset> split_by_treatment(const Dataset& ds);

struct SupportReport {
  CellCounts cell_counts;
  /// Estimated moderator propensity range within each treatment subset.
  /// With k=0 this is (mean s, mean s).
  double prop_min_t0 = 0.0, prop_max_t0 = 0.0;
  double prop_min_t1 = 0.0, prop_max_t1 = 0.0;
  bool empty_cell = false;
  bool within_bounds = true;  // all propensities inside [eps, 1-eps]
  bool separation_t0 = false;
  bool separation_t1 = false;
  double epsilon = 0.01;
};

/// Common-support diagnostics (moderator propensity interior to (0,1)).
/// Never throws for separation; sets the per-subset flag instead.
SupportReport check_common_support(const Dataset& ds, double epsilon = 0.01);

}  // namespace atme
