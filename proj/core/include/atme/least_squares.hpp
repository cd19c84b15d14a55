#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "atme/errors.hpp"

namespace atme {

enum class VarianceMode { Classical, HeteroskedasticityRobust, ClusterRobust };

std::string variance_mode_name(VarianceMode m);

struct LinearFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd residuals;
  std::vector<std::string> design_column_names;
  VarianceMode variance_mode = VarianceMode::HeteroskedasticityRobust;

  double coef(const std::string& name) const;
  double var(const std::string& name) const;
};

/// Least squares via column-pivoted Householder QR. Covariance per mode:
/// Classical sigma^2 (X'X)^-1, HC1 sandwich, or cluster-robust sandwich
/// with the (G/(G-1))((n-1)/(n-d)) small-sample factor.
/// Throws NumericError on rank deficiency (naming the collinear columns)
/// and on ClusterRobust without labels.
LinearFit least_squares_fit(
    const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
    VarianceMode mode, const std::vector<std::string>& column_names,
    const std::vector<std::string>* clusters = nullptr);

/// Weighted least squares (coefficients only, plus weighted RSS).
/// Used by the EM M-step; weights must be nonnegative.
struct WeightedLinearFit {
  Eigen::VectorXd coefficients;
  double weighted_rss = 0.0;
};
WeightedLinearFit weighted_least_squares(const Eigen::MatrixXd& design,
                                         const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& weights);

}  // namespace atme
