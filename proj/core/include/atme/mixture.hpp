#pragma once

#include <Eigen/Dense>
#include <optional>

#include "atme/dataset.hpp"

namespace atme {

/// Maximized parameters of the latent-confounder model on one treatment
/// subset, at fixed (alpha, kappa):
///   U ~ Bernoulli(1/2)
///   P(S=1 | X, U)   = logistic(zeta + X eta + alpha U)
///   Y | S, X, U     ~ Normal(xi + gamma S + X beta + kappa U, sigma^2)
struct MixtureMLEResult {
  double zeta = 0.0;
  Eigen::VectorXd eta;
  double xi = 0.0;
  double gamma = 0.0;
  Eigen::VectorXd beta;
  double sigma = 0.0;
  double alpha_fixed = 0.0;
  double kappa_fixed = 0.0;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct MixtureOptions {
  double loglik_tol = 1e-8;
  int max_iterations = 500;
  /// Optional warm start (previous grid cell's solution).
  std::optional<MixtureMLEResult> warm_start;
};

/// EM over the observed-data likelihood with U marginalized out.
/// `subset` must be a single treatment arm (from split_by_treatment).
/// E-step: posterior P(U=1 | S, Y, X) per row. M-step: weighted logistic
/// fit with offset alpha*U and weighted least squares with offset
/// kappa*U over the two U-branches of every row.
/// Throws NumericError on degenerate outcome variance.
MixtureMLEResult mixture_mle(const Dataset& subset, double alpha_fixed,
                             double kappa_fixed,
                             const MixtureOptions& opts = {});

}  // namespace atme
