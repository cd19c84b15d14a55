#include "atme/least_squares.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace atme {

std::string variance_mode_name(VarianceMode m) {
  switch (m) {
    case VarianceMode::Classical:
      return "classical";
    case VarianceMode::HeteroskedasticityRobust:
      return "hc1";
    case VarianceMode::ClusterRobust:
      return "cluster";
  }
  return "unknown";
}

double LinearFit::coef(const std::string& name) const {
  for (std::size_t i = 0; i < design_column_names.size(); ++i)
    if (design_column_names[i] == name)
      return coefficients[static_cast<Eigen::Index>(i)];
  throw NumericError("no design column named '" + name + "'");
}

double LinearFit::var(const std::string& name) const {
  for (std::size_t i = 0; i < design_column_names.size(); ++i)
    if (design_column_names[i] == name) {
      const auto j = static_cast<Eigen::Index>(i);
      return covariance(j, j);
    }
  throw NumericError("no design column named '" + name + "'");
}

namespace {

constexpr double kRankTol = 1e-10;

/// Names the columns past the numerical rank in pivot order.
std::string collinear_columns(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr,
                              const std::vector<std::string>& names,
                              Eigen::Index rank) {
  std::ostringstream os;
  const auto perm = qr.colsPermutation().indices();
  for (Eigen::Index i = rank; i < perm.size(); ++i) {
    if (i > rank) os << ", ";
    const auto col = static_cast<std::size_t>(perm[i]);
    os << (col < names.size() ? names[col] : "col" + std::to_string(col));
  }
  return os.str();
}

}  // namespace

LinearFit least_squares_fit(const Eigen::MatrixXd& design,
                            const Eigen::VectorXd& y, VarianceMode mode,
                            const std::vector<std::string>& column_names,
                            const std::vector<std::string>* clusters) {
  const Eigen::Index n = design.rows();
  const Eigen::Index d = design.cols();
  if (y.size() != n) throw NumericError("design/response length mismatch");
  if (n < d) throw NumericError("fewer rows than design columns");
  if (mode == VarianceMode::ClusterRobust &&
      (clusters == nullptr || static_cast<Eigen::Index>(clusters->size()) != n))
    throw NumericError("cluster-robust variance requested without labels");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  // relative rank check against the largest singular value
  {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(design);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv[sv.size() - 1] < kRankTol * sv[0]) {
      Eigen::Index rank = 0;
      for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] >= kRankTol * sv[0]) ++rank;
      throw NumericError("rank-deficient design; collinear columns: " +
                         collinear_columns(qr, column_names, rank));
    }
  }

  LinearFit fit;
  fit.coefficients = qr.solve(y);
  fit.residuals = y - design * fit.coefficients;
  fit.design_column_names = column_names;
  fit.variance_mode = mode;

  // (X'X)^-1 via the QR factor
  const Eigen::MatrixXd xtx_inv =
      (design.transpose() * design)
          .ldlt()
          .solve(Eigen::MatrixXd::Identity(d, d));

  switch (mode) {
    case VarianceMode::Classical: {
      const double dof = static_cast<double>(n - d);
      const double sigma2 =
          dof > 0 ? fit.residuals.squaredNorm() / dof : 0.0;
      fit.covariance = sigma2 * xtx_inv;
      break;
    }
    case VarianceMode::HeteroskedasticityRobust: {
      Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(d, d);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double e2 = fit.residuals[i] * fit.residuals[i];
        meat.noalias() += e2 * design.row(i).transpose() * design.row(i);
      }
      const double factor =
          n > d ? static_cast<double>(n) / static_cast<double>(n - d) : 1.0;
      fit.covariance = factor * xtx_inv * meat * xtx_inv;
      break;
    }
    case VarianceMode::ClusterRobust: {
      std::map<std::string, Eigen::VectorXd> scores;
      for (Eigen::Index i = 0; i < n; ++i) {
        auto [it, inserted] = scores.try_emplace(
            (*clusters)[static_cast<std::size_t>(i)],
            Eigen::VectorXd::Zero(d));
        it->second.noalias() +=
            fit.residuals[i] * design.row(i).transpose();
      }
      Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(d, d);
      for (const auto& [label, g] : scores)
        meat.noalias() += g * g.transpose();
      const double ng = static_cast<double>(scores.size());
      double factor = 1.0;
      if (ng > 1 && n > d)
        factor = (ng / (ng - 1.0)) * (static_cast<double>(n - 1) /
                                      static_cast<double>(n - d));
      fit.covariance = factor * xtx_inv * meat * xtx_inv;
      break;
    }
  }
  // symmetrize away accumulation noise
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose());
  return fit;
}

WeightedLinearFit weighted_least_squares(const Eigen::MatrixXd& design,
                                         const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& weights) {
  const Eigen::VectorXd sw = weights.cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd wd = sw.asDiagonal() * design;
  const Eigen::VectorXd wy = sw.asDiagonal() * y;
  WeightedLinearFit out;
  out.coefficients = wd.colPivHouseholderQr().solve(wy);
  out.weighted_rss = (wy - wd * out.coefficients).squaredNorm();
  return out;
}

}  // namespace atme
