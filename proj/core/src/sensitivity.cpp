#include "atme/sensitivity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <thread>

#include "atme/estimators.hpp"
#include "atme/logistic.hpp"

namespace atme {

SensitivitySpec make_spec(double alpha_tilde, double kappa_diff,
                          KappaSplit split) {
  SensitivitySpec spec;
  spec.alpha_tilde = alpha_tilde;
  if (split == KappaSplit::Symmetric) {
    spec.kappa0_tilde = -kappa_diff / 2.0;
    spec.kappa1_tilde = kappa_diff / 2.0;
  } else {
    spec.kappa0_tilde = 0.0;
    spec.kappa1_tilde = kappa_diff;
  }
  return spec;
}

SensitivityPoint sensitivity_point(const Dataset& ds,
                                   const SensitivitySpec& spec,
                                   const MixtureOptions& opts) {
  auto [ds0, ds1] = split_by_treatment(ds);
  SensitivityPoint pt;
  pt.spec = spec;
  try {
    pt.subset_t0 = mixture_mle(ds0, spec.alpha_tilde, spec.kappa0_tilde, opts);
  } catch (const NumericError& e) {
    throw NumericError(std::string("T=0 subset: ") + e.what());
  }
  try {
    pt.subset_t1 = mixture_mle(ds1, spec.alpha_tilde, spec.kappa1_tilde, opts);
  } catch (const NumericError& e) {
    throw NumericError(std::string("T=1 subset: ") + e.what());
  }
  pt.delta_adjusted = pt.subset_t1.gamma - pt.subset_t0.gamma;
  pt.converged = pt.subset_t0.converged && pt.subset_t1.converged;
  return pt;
}

SensitivityGrid sensitivity_grid(const Dataset& ds,
                                 const std::vector<double>& alpha_grid,
                                 const std::vector<double>& kappa_diff_grid,
                                 KappaSplit split, int threads) {
  if (alpha_grid.empty() || kappa_diff_grid.empty())
    throw ValidationError("sensitivity grids must be non-empty");
  SensitivityGrid grid;
  grid.alpha_grid = alpha_grid;
  grid.kappa_diff_grid = kappa_diff_grid;
  grid.points.resize(alpha_grid.size() * kappa_diff_grid.size());

  auto [ds0, ds1] = split_by_treatment(ds);

  // rows (fixed alpha) are independent; within a row, cells warm-start
  // from the previous kappa cell
  auto run_row = [&](std::size_t a) {
    MixtureOptions o0, o1;
    for (std::size_t k = 0; k < kappa_diff_grid.size(); ++k) {
      const SensitivitySpec spec =
          make_spec(alpha_grid[a], kappa_diff_grid[k], split);
      SensitivityPoint& pt = grid.points[a * kappa_diff_grid.size() + k];
      pt.spec = spec;
      try {
        pt.subset_t0 =
            mixture_mle(ds0, spec.alpha_tilde, spec.kappa0_tilde, o0);
        pt.subset_t1 =
            mixture_mle(ds1, spec.alpha_tilde, spec.kappa1_tilde, o1);
        pt.delta_adjusted = pt.subset_t1.gamma - pt.subset_t0.gamma;
        pt.converged = pt.subset_t0.converged && pt.subset_t1.converged;
        o0.warm_start = pt.subset_t0;
        o1.warm_start = pt.subset_t1;
      } catch (const NumericError&) {
        pt.converged = false;
      }
    }
  };

  unsigned int nthreads =
      threads > 0 ? static_cast<unsigned int>(threads)
                  : std::max(1u, std::thread::hardware_concurrency());
  nthreads = std::min<unsigned int>(
      nthreads, static_cast<unsigned int>(alpha_grid.size()));
  if (nthreads <= 1) {
    for (std::size_t a = 0; a < alpha_grid.size(); ++a) run_row(a);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned int t = 0; t < nthreads; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t a = next.fetch_add(1);
          if (a >= alpha_grid.size()) return;
          run_row(a);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  return grid;
}

BenchmarkReferences benchmark_references(const Dataset& ds) {
  BenchmarkReferences refs;
  refs.atme_reference = parallel_regression(ds).estimate;

  if (ds.k() == 0) return refs;

  std::vector<Eigen::Index> binary_cols;
  for (Eigen::Index j = 0; j < ds.k(); ++j) {
    bool binary = true, has0 = false, has1 = false;
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      const double v = ds.x(i, j);
      if (v == 0.0)
        has0 = true;
      else if (v == 1.0)
        has1 = true;
      else {
        binary = false;
        break;
      }
    }
    if (binary && has0 && has1) binary_cols.push_back(j);
  }
  if (binary_cols.empty()) return refs;

  // pooled selection fit (alpha is shared across subsets)
  Eigen::MatrixXd design(ds.n(), ds.k() + 1);
  design.col(0).setOnes();
  design.rightCols(ds.k()) = ds.x;
  LogisticOptions lopts;
  lopts.throw_on_separation = false;
  const LogisticFit fit = logistic_fit(design, ds.s.cast<double>(), lopts);
  refs.selection_separation = fit.separation;

  double best = -1.0;
  for (const auto j : binary_cols) {
    const double c = std::abs(fit.coefficients[j + 1]);
    if (c > best) {
      best = c;
      refs.max_observed_selection = c;
      refs.max_selection_covariate =
          ds.covariate_names.size() > static_cast<std::size_t>(j)
              ? ds.covariate_names[static_cast<std::size_t>(j)]
              : "x" + std::to_string(j);
    }
  }
  return refs;
}

LevelCurve level_curve(const Dataset& ds, double fraction,
                       const std::vector<double>& alpha_grid,
                       const LevelCurveOptions& opts) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw ValidationError("fraction must be in (0, 1]");
  if (alpha_grid.empty())
    throw ValidationError("alpha grid must be non-empty");

  LevelCurve curve;
  curve.fraction = fraction;
  curve.tolerance = opts.tolerance;
  curve.references = benchmark_references(ds);
  curve.delta_hat = curve.references.atme_reference;
  if (curve.delta_hat == 0.0)
    throw ValidationError("level curve undefined: ATME estimate is zero");
  const double target = fraction * curve.delta_hat;

  std::vector<double> alphas = alpha_grid;
  std::sort(alphas.begin(), alphas.end());

  for (const double alpha : alphas) {
    auto eval = [&](double kd) {
      const SensitivitySpec spec = make_spec(alpha, kd, opts.split);
      return sensitivity_point(ds, spec);
    };

    // walk outward from 0 in both directions until the residual changes
    // sign between consecutive evaluations
    SensitivityPoint at0 = eval(0.0);
    double f0 = at0.delta_adjusted - target;
    bool found = false;
    double lo = 0.0, hi = 0.0, flo = f0, fhi = f0;
    if (std::abs(f0) <= opts.tolerance) {
      curve.points.push_back(
          {alpha, 0.0, at0.delta_adjusted, at0.converged, std::abs(f0)});
      continue;
    }
    for (const double dir : {1.0, -1.0}) {
      double prev_kd = 0.0, prev_f = f0;
      for (double step = opts.bracket_initial; step <= opts.bracket_max;
           step *= 2.0) {
        const double kd = dir * step;
        double f;
        try {
          f = eval(kd).delta_adjusted - target;
        } catch (const NumericError&) {
          break;
        }
        if ((prev_f < 0.0) != (f < 0.0)) {
          lo = prev_kd;
          hi = kd;
          flo = prev_f;
          fhi = f;
          found = true;
          break;
        }
        prev_kd = kd;
        prev_f = f;
      }
      if (found) break;
    }
    if (!found) {
      curve.unbracketed.push_back(alpha);
      continue;
    }

    SensitivityPoint best = at0;
    double best_kd = lo;
    for (int it = 0; it < opts.bisection_max_iterations; ++it) {
      const double mid = 0.5 * (lo + hi);
      SensitivityPoint pt = eval(mid);
      const double f = pt.delta_adjusted - target;
      best = pt;
      best_kd = mid;
      if (std::abs(f) <= opts.tolerance) break;
      if ((f < 0.0) == (flo < 0.0)) {
        lo = mid;
        flo = f;
      } else {
        hi = mid;
        fhi = f;
      }
    }
    curve.points.push_back({alpha, best_kd, best.delta_adjusted,
                            best.converged,
                            std::abs(best.delta_adjusted - target)});
  }
  return curve;
}

}  // namespace atme
