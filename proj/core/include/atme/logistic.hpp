#pragma once

#include <Eigen/Dense>
#include <string>

#include "atme/errors.hpp"

namespace atme {

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct LogisticFit {
  Eigen::VectorXd coefficients;
  bool converged = false;
  int iterations = 0;
  bool separation = false;

  /// P(s=1 | row), strictly inside (0,1). `row` must match the design
  /// width (intercept included).
  double predict(const Eigen::VectorXd& row) const;
};

/// Separation failure carrying the partial fit at the point of abort.
class SeparationError : public NumericError {
 public:
  SeparationError(const std::string& msg, LogisticFit partial)
      : NumericError(msg), partial_fit(std::move(partial)) {}
  LogisticFit partial_fit;
};

struct LogisticOptions {
  double grad_tol = 1e-8;
  int max_iterations = 100;
  /// Coefficient magnitude beyond which the fit is treated as separated.
  double separation_bound = 30.0;
  /// Throw SeparationError instead of flagging and returning.
  bool throw_on_separation = true;
};

/// Maximum-likelihood logistic regression by iteratively reweighted least
/// squares. `design` must already include the intercept column. Optional
/// per-row weights and a fixed offset added to the linear predictor
/// support the mixture EM M-step.
LogisticFit logistic_fit(const Eigen::MatrixXd& design,
                         const Eigen::VectorXd& s,
                         const LogisticOptions& opts = {},
                         const Eigen::VectorXd* weights = nullptr,
                         const Eigen::VectorXd* offset = nullptr);

}  // namespace atme
