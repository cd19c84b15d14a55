#include "atme/matching.hpp"

#include <Eigen/Cholesky>
#include <limits>
#include <vector>

namespace atme {

namespace {

/// Within-group pooled covariance of the features.
Eigen::MatrixXd pooled_covariance(const Eigen::MatrixXd& features,
                                  const Eigen::VectorXi& group) {
  const Eigen::Index k = features.cols();
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(k, k);
  double dof = 0.0;
  for (int g = 0; g <= 1; ++g) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < features.rows(); ++i)
      if (group[i] == g) rows.push_back(i);
    if (rows.size() < 2) continue;
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(k);
    for (auto i : rows) mean += features.row(i);
    mean /= static_cast<double>(rows.size());
    for (auto i : rows) {
      const Eigen::RowVectorXd c = features.row(i) - mean;
      scatter.noalias() += c.transpose() * c;
    }
    dof += static_cast<double>(rows.size() - 1);
  }
  if (dof <= 0.0) throw NumericError("too few rows to pool a covariance");
  return scatter / dof;
}

}  // namespace

MatchSet mahalanobis_match(const Eigen::MatrixXd& features,
                           const Eigen::VectorXi& group,
                           bool with_replacement) {
  if (!with_replacement)
    throw NumericError("only matching with replacement is supported");
  const Eigen::Index n = features.rows();
  if (group.size() != n) throw NumericError("feature/group length mismatch");
  if (n < 2) throw NumericError("matching requires at least 2 rows");

  std::vector<Eigen::Index> targets, pool;
  for (Eigen::Index i = 0; i < n; ++i)
    (group[i] == 1 ? targets : pool).push_back(i);
  if (targets.empty() || pool.empty())
    throw NumericError("both match groups must be non-empty");

  Eigen::MatrixXd cov = pooled_covariance(features, group);

  MatchSet out;
  const Eigen::Index k = features.cols();
  // ridge escalation until the metric is invertible
  double ridge = 0.0;
  double eps = 1e-8;
  const double mean_diag = cov.diagonal().mean();
  for (;;) {
    Eigen::MatrixXd regularized = cov;
    regularized.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(regularized);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
        ldlt.vectorD().minCoeff() > 1e-14 * std::max(1.0, mean_diag)) {
      out.inverse_covariance =
          ldlt.solve(Eigen::MatrixXd::Identity(k, k));
      break;
    }
    ridge = eps * (mean_diag > 0.0 ? mean_diag : 1.0);
    eps *= 10.0;
    if (eps > 1.0)
      throw NumericError("zero-variance feature set; metric undefined");
  }
  out.ridge = ridge;

  for (auto ti : targets) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index best_j = pool.front();
    for (auto j : pool) {
      const Eigen::VectorXd diff = features.row(ti) - features.row(j);
      const double d2 = diff.dot(out.inverse_covariance * diff);
      if (d2 < best) {  // strict: ties keep the lowest index
        best = d2;
        best_j = j;
      }
    }
    const double dist = std::sqrt(std::max(0.0, best));
    out.pairs.push_back({static_cast<std::size_t>(ti),
                         static_cast<std::size_t>(best_j), dist});
    ++out.multiplicity[static_cast<std::size_t>(best_j)];
  }
  return out;
}

}  // namespace atme
