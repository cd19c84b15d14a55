#include "atme/logistic.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

namespace atme {

double LogisticFit::predict(const Eigen::VectorXd& row) const {
  const double p = logistic(row.dot(coefficients));
  // keep strictly interior
  return std::clamp(p, 1e-15, 1.0 - 1e-15);
}

LogisticFit logistic_fit(const Eigen::MatrixXd& design,
                         const Eigen::VectorXd& s,
                         const LogisticOptions& opts,
                         const Eigen::VectorXd* weights,
                         const Eigen::VectorXd* offset) {
  const Eigen::Index n = design.rows();
  const Eigen::Index d = design.cols();
  if (s.size() != n) throw NumericError("design/response length mismatch");

  const Eigen::VectorXd w =
      weights ? *weights : Eigen::VectorXd::Ones(n);
  {
    bool has0 = false, has1 = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (w[i] <= 0.0) continue;
      (s[i] > 0.5 ? has1 : has0) = true;
    }
    if (!has0 || !has1)
      throw NumericError("logistic fit requires both classes present");
  }

  LogisticFit fit;
  fit.coefficients = Eigen::VectorXd::Zero(d);

  Eigen::VectorXd eta(n), mu(n), grad(d);
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    fit.iterations = iter;
    eta = design * fit.coefficients;
    if (offset) eta += *offset;
    for (Eigen::Index i = 0; i < n; ++i) mu[i] = logistic(eta[i]);

    grad = design.transpose() * (w.cwiseProduct(s - mu));
    if (grad.norm() < opts.grad_tol) {
      fit.converged = true;
      break;
    }

    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double wi = w[i] * mu[i] * (1.0 - mu[i]);
      hess.noalias() += wi * design.row(i).transpose() * design.row(i);
    }
    // tiny ridge keeps the Newton step defined when weights collapse
    hess.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    fit.coefficients += step;

    if (!fit.coefficients.allFinite() ||
        fit.coefficients.lpNorm<Eigen::Infinity>() > opts.separation_bound) {
      fit.separation = true;
      if (opts.throw_on_separation)
        throw SeparationError("perfect/quasi-separation detected", fit);
      return fit;
    }
  }

  // A perfectly separating direction can also stall the gradient before
  // the coefficient bound trips: every observation then sits essentially
  // on its own label.
  eta = design * fit.coefficients;
  if (offset) eta += *offset;
  bool all_on_label = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (w[i] <= 0.0) continue;
    if (std::abs(s[i] - logistic(eta[i])) > 1e-6) {
      all_on_label = false;
      break;
    }
  }
  if (all_on_label) {
    fit.separation = true;
    if (opts.throw_on_separation)
      throw SeparationError("perfect/quasi-separation detected", fit);
  }
  return fit;
}

}  // namespace atme
