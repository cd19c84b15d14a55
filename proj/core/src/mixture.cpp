#include "atme/mixture.hpp"

#include <cassert>
#include <cmath>

#include "atme/least_squares.hpp"
#include "atme/logistic.hpp"
#include "atme/normal.hpp"

namespace atme {

namespace {

constexpr double kLogHalf = -0.6931471805599453;

struct Branches {
  // per-row log joint density of (S, Y) for u = 0 and u = 1
  Eigen::VectorXd log0;
  Eigen::VectorXd log1;
};

Branches branch_logliks(const Dataset& ds, const MixtureMLEResult& th) {
  const Eigen::Index n = ds.n();
  Branches b{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xb_sel =
        th.zeta + (ds.k() > 0 ? ds.x.row(i).dot(th.eta) : 0.0);
    const double mu =
        th.xi + th.gamma * ds.s[i] +
        (ds.k() > 0 ? ds.x.row(i).dot(th.beta) : 0.0);
    for (int u = 0; u <= 1; ++u) {
      const double p = logistic(xb_sel + th.alpha_fixed * u);
      const double lsel =
          ds.s[i] == 1 ? std::log(p) : std::log1p(-p);
      const double ly =
          normal_log_pdf(ds.y[i], mu + th.kappa_fixed * u, th.sigma);
      (u == 0 ? b.log0[i] : b.log1[i]) = lsel + ly;
    }
  }
  return b;
}

double observed_loglik(const Branches& b) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < b.log0.size(); ++i) {
    const double m = std::max(b.log0[i], b.log1[i]);
    ll += kLogHalf + m +
          std::log(std::exp(b.log0[i] - m) + std::exp(b.log1[i] - m));
  }
  return ll;
}

}  // namespace

MixtureMLEResult mixture_mle(const Dataset& ds, double alpha_fixed,
                             double kappa_fixed,
                             const MixtureOptions& opts) {
  const Eigen::Index n = ds.n();
  const Eigen::Index k = ds.k();
  if (n < k + 3) throw NumericError("too few rows for mixture MLE");

  const double y_var =
      (ds.y.array() - ds.y.mean()).square().sum() / static_cast<double>(n);
  if (y_var < 1e-12) throw NumericError("degenerate outcome variance");

  Eigen::MatrixXd sel_design(n, k + 1);
  sel_design.col(0).setOnes();
  if (k > 0) sel_design.rightCols(k) = ds.x;

  Eigen::MatrixXd out_design(n, k + 2);
  out_design.col(0).setOnes();
  out_design.col(1) = ds.s.cast<double>();
  if (k > 0) out_design.rightCols(k) = ds.x;

  MixtureMLEResult th;
  th.alpha_fixed = alpha_fixed;
  th.kappa_fixed = kappa_fixed;

  LogisticOptions lopts;
  lopts.throw_on_separation = false;

  if (opts.warm_start) {
    th = *opts.warm_start;
    th.alpha_fixed = alpha_fixed;
    th.kappa_fixed = kappa_fixed;
    th.iterations = 0;
    th.converged = false;
  } else {
    // fits ignoring U as the deterministic starting point
    const LogisticFit sel =
        logistic_fit(sel_design, ds.s.cast<double>(), lopts);
    th.zeta = sel.coefficients[0];
    th.eta = sel.coefficients.tail(k);
    const WeightedLinearFit ols = weighted_least_squares(
        out_design, ds.y, Eigen::VectorXd::Ones(n));
    th.xi = ols.coefficients[0];
    th.gamma = ols.coefficients[1];
    th.beta = ols.coefficients.tail(k);
    th.sigma = std::sqrt(std::max(ols.weighted_rss / n, 1e-12));
  }
  if (th.eta.size() != k) th.eta = Eigen::VectorXd::Zero(k);
  if (th.beta.size() != k) th.beta = Eigen::VectorXd::Zero(k);

  // stacked two-branch rows: block 0 is u=0, block 1 is u=1
  Eigen::MatrixXd sel2(2 * n, k + 1), out2(2 * n, k + 2);
  sel2 << sel_design, sel_design;
  out2 << out_design, out_design;
  Eigen::VectorXd s2(2 * n), y2(2 * n), sel_offset(2 * n);
  s2 << ds.s.cast<double>(), ds.s.cast<double>();
  y2 << ds.y, ds.y.array() - kappa_fixed;
  sel_offset.head(n).setZero();
  sel_offset.tail(n).setConstant(alpha_fixed);

  double ll_prev = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd w2(2 * n);
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    th.iterations = iter;

    // E-step
    const Branches b = branch_logliks(ds, th);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = std::max(b.log0[i], b.log1[i]);
      const double e0 = std::exp(b.log0[i] - m);
      const double e1 = std::exp(b.log1[i] - m);
      const double w = e1 / (e0 + e1);
      w2[i] = 1.0 - w;
      w2[n + i] = w;
    }

    // M-step
    const LogisticFit sel =
        logistic_fit(sel2, s2, lopts, &w2, &sel_offset);
    th.zeta = sel.coefficients[0];
    th.eta = sel.coefficients.tail(k);
    const WeightedLinearFit wls = weighted_least_squares(out2, y2, w2);
    th.xi = wls.coefficients[0];
    th.gamma = wls.coefficients[1];
    th.beta = wls.coefficients.tail(k);
    const double s2hat = wls.weighted_rss / static_cast<double>(n);
    if (s2hat < 1e-14) throw NumericError("degenerate outcome variance");
    th.sigma = std::sqrt(s2hat);

    th.log_likelihood = observed_loglik(branch_logliks(ds, th));
    assert(th.log_likelihood >= ll_prev - 1e-7 &&
           "EM log-likelihood must be non-decreasing");
    if (std::abs(th.log_likelihood - ll_prev) < opts.loglik_tol) {
      th.converged = true;
      break;
    }
    ll_prev = th.log_likelihood;
  }
  return th;
}

}  // namespace atme
