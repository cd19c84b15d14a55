#pragma once

#include <optional>
#include <string>
#include <vector>

#include "atme/dataset.hpp"
#include "atme/mixture.hpp"

namespace atme {

/// Fixed hypothetical confounder parameters: alpha is the selection
/// effect of U on S (shared across treatment subsets); kappa0/kappa1 are
/// U's effect on Y within T=0 and T=1.
struct SensitivitySpec {
  double alpha_tilde = 0.0;
  double kappa0_tilde = 0.0;
  double kappa1_tilde = 0.0;

  double kappa_diff() const { return kappa1_tilde - kappa0_tilde; }
};

/// How to resolve (kappa0, kappa1) from a kappa difference.
enum class KappaSplit {
  Symmetric,  // (-d/2, +d/2)
  Anchored,   // (0, d)
};

SensitivitySpec make_spec(double alpha_tilde, double kappa_diff,
                          KappaSplit split);

struct SensitivityPoint {
  SensitivitySpec spec;
  double delta_adjusted = 0.0;  // gamma1_tilde - gamma0_tilde
  MixtureMLEResult subset_t0;
  MixtureMLEResult subset_t1;
  bool converged = false;
};

/// Mixture MLE on each treatment subset at the spec's fixed parameters;
/// the adjusted ATME is the difference of the two gamma estimates.
SensitivityPoint sensitivity_point(const Dataset& ds,
                                   const SensitivitySpec& spec,
                                   const MixtureOptions& opts = {});

struct SensitivityGrid {
  std::vector<double> alpha_grid;
  std::vector<double> kappa_diff_grid;
  /// Row-major: points[a * kappa_diff_grid.size() + k].
  std::vector<SensitivityPoint> points;
};

/// Full Cartesian sweep. Cells warm-start from the previous cell along
/// the kappa axis; non-converged cells are flagged, not fatal. `threads`
/// parallelizes across alpha rows with identical output for any count.
SensitivityGrid sensitivity_grid(const Dataset& ds,
                                 const std::vector<double>& alpha_grid,
                                 const std::vector<double>& kappa_diff_grid,
                                 KappaSplit split = KappaSplit::Symmetric,
                                 int threads = 0);

struct BenchmarkReferences {
  /// Largest |logistic coefficient| of an observed binary covariate in
  /// the pooled S-selection fit; absent when no binary covariate exists.
  std::optional<double> max_observed_selection;
  std::optional<std::string> max_selection_covariate;
  bool selection_separation = false;
  /// Parallel-regression ATME estimate.
  double atme_reference = 0.0;
};

BenchmarkReferences benchmark_references(const Dataset& ds);

struct LevelCurvePoint {
  double alpha_tilde = 0.0;
  double kappa_diff = 0.0;
  double delta_adjusted = 0.0;
  bool converged = false;
  double residual = 0.0;  // |delta_adjusted - fraction * delta_hat|
};

struct LevelCurve {
  double fraction = 0.5;
  double delta_hat = 0.0;  // unadjusted parallel-regression estimate
  double tolerance = 0.0;
  std::vector<LevelCurvePoint> points;  // sorted by alpha_tilde
  /// Alphas where no sign change could be bracketed.
  std::vector<double> unbracketed;
  BenchmarkReferences references;
};

struct LevelCurveOptions {
  double tolerance = 1e-4;
  double bracket_initial = 0.25;
  double bracket_max = 64.0;
  int bisection_max_iterations = 80;
  KappaSplit split = KappaSplit::Symmetric;
};

/// For each alpha, solves delta_adjusted(alpha, kappa_diff)
/// = fraction * delta_hat in kappa_diff by geometric bracket expansion
/// plus bisection. Throws ValidationError when delta_hat is zero.
LevelCurve level_curve(const Dataset& ds, double fraction,
                       const std::vector<double>& alpha_grid,
                       const LevelCurveOptions& opts = {});

}  // namespace atme
