#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <map>
#include <vector>

#include "atme/errors.hpp"

namespace atme {

struct MatchPair {
  std::size_t target_index;   // group-1 ("moderated") row
  std::size_t matched_index;  // nearest group-0 row
  double distance;
};

struct MatchSet {
  std::vector<MatchPair> pairs;
  /// How many times each group-0 row was used as a match.
  std::map<std::size_t, std::size_t> multiplicity;
  /// Inverse pooled covariance defining the metric.
  Eigen::MatrixXd inverse_covariance;
  /// Ridge added to make the pooled covariance invertible (0 if none).
  double ridge = 0.0;
};

/// Nearest-neighbor Mahalanobis matching with replacement: each group-1
/// row is matched to the closest group-0 row under the inverse pooled
/// (within-group) covariance metric. Ties break to the lowest row index.
/// A singular pooled covariance gets a ridge of eps*mean(diag), eps
/// starting at 1e-8 and escalating x10 until invertible.
MatchSet mahalanobis_match(const Eigen::MatrixXd& features,
                           const Eigen::VectorXi& group,
                           bool with_replacement = true);

}  // namespace atme
