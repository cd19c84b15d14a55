#include "atme/estimators.hpp"

#include <cassert>
#include <cmath>
#include <numeric>
#include <sstream>

#include "atme/logistic.hpp"

namespace atme {

namespace {

void require_full_cells(const Dataset& ds) {
  if (count_cells(ds).any_empty())
    throw ValidationError("empty (T,S) cell");
}

std::vector<std::string> covariate_design_names(const Dataset& ds) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < ds.k(); ++j)
    names.push_back(ds.covariate_names.size() >
                            static_cast<std::size_t>(j)
                        ? ds.covariate_names[static_cast<std::size_t>(j)]
                        : "x" + std::to_string(j));
  return names;
}

const std::vector<std::string>* cluster_ptr(const Dataset& ds,
                                            VarianceMode mode) {
  return mode == VarianceMode::ClusterRobust && ds.cluster
             ? &*ds.cluster
             : nullptr;
}

/// Mean and variance-of-mean of a cell, honoring the variance mode via
/// an intercept-only regression.
std::pair<double, double> cell_mean(const Dataset& ds,
                                    const std::vector<Eigen::Index>& rows,
                                    VarianceMode mode) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd y(n);
  std::vector<std::string> cl;
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = ds.y[rows[static_cast<std::size_t>(i)]];
    if (ds.cluster)
      cl.push_back(
          (*ds.cluster)[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])]);
  }
  if (n == 1) return {y[0], 0.0};
  const LinearFit fit = least_squares_fit(
      Eigen::MatrixXd::Ones(n, 1), y, mode, {"intercept"},
      mode == VarianceMode::ClusterRobust && ds.cluster ? &cl : nullptr);
  return {fit.coefficients[0], fit.covariance(0, 0)};
}

}  // namespace

EstimateResult subset_difference(const Dataset& ds,
                                 const EstimatorOptions& opts) {
  require_full_cells(ds);
  std::vector<Eigen::Index> cells[2][2];
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    cells[ds.t[i]][ds.s[i]].push_back(i);

  double means[2][2], vars[2][2];
  for (int t = 0; t <= 1; ++t)
    for (int s = 0; s <= 1; ++s)
      std::tie(means[t][s], vars[t][s]) =
          cell_mean(ds, cells[t][s], opts.variance);

  EstimateResult r;
  r.method = Method::SubsetDifference;
  r.estimate =
      (means[1][1] - means[0][1]) - (means[1][0] - means[0][0]);
  r.variance = vars[1][1] + vars[0][1] + vars[1][0] + vars[0][0];
  r.cell_counts = count_cells(ds);
  r.diagnostics["biased_for_atme"] = "true";
  r.diagnostics["note"] = "heterogeneity descriptor (CATE difference)";
  finalize_result(r, opts.level);
  return r;
}

namespace {

struct SingleRegression {
  LinearFit fit;
  std::string interaction_name;
};

SingleRegression interaction_regression(const Dataset& ds,
                                        const EstimatorOptions& opts,
                                        bool full) {
  const Eigen::Index n = ds.n();
  const Eigen::Index k = ds.k();
  const Eigen::Index d = 4 + k + (full ? k : 0);
  Eigen::MatrixXd design(n, d);
  std::vector<std::string> names;
  design.col(0).setOnes();
  names.push_back("intercept");
  design.col(1) = ds.t.cast<double>();
  names.push_back("t");
  design.col(2) = ds.s.cast<double>();
  names.push_back("s");
  const auto covs = covariate_design_names(ds);
  for (Eigen::Index j = 0; j < k; ++j) {
    design.col(3 + j) = ds.x.col(j);
    names.push_back(covs[static_cast<std::size_t>(j)]);
  }
  design.col(3 + k) =
      ds.t.cast<double>().cwiseProduct(ds.s.cast<double>());
  names.push_back("t:s");
  if (full) {
    for (Eigen::Index j = 0; j < k; ++j) {
      design.col(4 + k + j) =
          ds.t.cast<double>().cwiseProduct(ds.x.col(j));
      names.push_back("t:" + covs[static_cast<std::size_t>(j)]);
    }
  }
  return {least_squares_fit(design, ds.y, opts.variance, names,
                            cluster_ptr(ds, opts.variance)),
          "t:s"};
}

}  // namespace

EstimateResult controlled_interaction(const Dataset& ds,
                                      const EstimatorOptions& opts) {
  require_full_cells(ds);
  const auto reg = interaction_regression(ds, opts, /*full=*/false);
  EstimateResult r;
  r.method = Method::ControlledInteraction;
  r.estimate = reg.fit.coef(reg.interaction_name);
  r.variance = reg.fit.var(reg.interaction_name);
  r.cell_counts = count_cells(ds);
  r.diagnostics["biased_for_atme"] = "true";
  r.diagnostics["variance_mode"] = variance_mode_name(opts.variance);
  finalize_result(r, opts.level);
  return r;
}

namespace {

struct SubsetFit {
  double gamma;
  double var;
};

SubsetFit fit_subset(const Dataset& sub, const EstimatorOptions& opts) {
  const int s_sum = sub.s.sum();
  if (s_sum == 0 || s_sum == sub.n())
    throw ValidationError(
        "single-level moderator within a treatment subset");
  const Eigen::Index k = sub.k();
  Eigen::MatrixXd design(sub.n(), 2 + k);
  design.col(0).setOnes();
  design.col(1) = sub.s.cast<double>();
  if (k > 0) design.rightCols(k) = sub.x;
  std::vector<std::string> names = {"intercept", "s"};
  for (const auto& c : covariate_design_names(sub)) names.push_back(c);
  const LinearFit fit =
      least_squares_fit(design, sub.y, opts.variance, names,
                        cluster_ptr(sub, opts.variance));
  return {fit.coef("s"), fit.var("s")};
}

}  // namespace

EstimateResult parallel_regression(const Dataset& ds,
                                   const EstimatorOptions& opts) {
  auto [ds0, ds1] = split_by_treatment(ds);
  const SubsetFit f0 = fit_subset(ds0, opts);
  const SubsetFit f1 = fit_subset(ds1, opts);

  EstimateResult r;
  r.method = Method::ParallelRegression;
  r.estimate = f1.gamma - f0.gamma;
  r.variance = f0.var + f1.var;
  r.subset_components = SubsetComponents{f0.gamma, f0.var, f1.gamma, f1.var};
  r.cell_counts = count_cells(ds);
  r.diagnostics["variance_mode"] = variance_mode_name(opts.variance);
  finalize_result(r, opts.level);
  return r;
}

EstimateResult full_interaction(const Dataset& ds,
                                const EstimatorOptions& opts) {
  const auto reg = interaction_regression(ds, opts, /*full=*/true);
  EstimateResult r;
  r.method = Method::FullInteraction;
  r.estimate = reg.fit.coef(reg.interaction_name);
  r.variance = reg.fit.var(reg.interaction_name);
  r.cell_counts = count_cells(ds);
  r.diagnostics["variance_mode"] = variance_mode_name(opts.variance);
  finalize_result(r, opts.level);
#ifndef NDEBUG
  {
    const double pr = parallel_regression(ds, opts).estimate;
    assert(std::abs(r.estimate - pr) <=
               1e-8 * std::max(1.0, std::abs(pr)) &&
           "full interaction must equal parallel regression");
  }
#endif
  return r;
}

namespace {

struct MatchedEffect {
  double effect;
  double var;
  MatchSet matches;
};

MatchedEffect matched_effect(const Dataset& sub) {
  MatchedEffect out{0.0, 0.0,
                    mahalanobis_match(sub.x, sub.s, /*with_replacement=*/true)};
  const auto n1 = static_cast<double>(out.matches.pairs.size());
  Eigen::VectorXd d(out.matches.pairs.size());
  for (std::size_t i = 0; i < out.matches.pairs.size(); ++i) {
    const auto& p = out.matches.pairs[i];
    d[static_cast<Eigen::Index>(i)] =
        sub.y[static_cast<Eigen::Index>(p.target_index)] -
        sub.y[static_cast<Eigen::Index>(p.matched_index)];
  }
  out.effect = d.mean();
  if (d.size() > 1) {
    const double s2 =
        (d.array() - out.effect).square().sum() / (n1 - 1.0);
    // reused controls inflate the variance of the mean contrast
    double reuse = 0.0;
    for (const auto& [idx, mult] : out.matches.multiplicity)
      reuse += static_cast<double>(mult) * static_cast<double>(mult - 1);
    out.var = (s2 / n1) * (1.0 + reuse / n1);
  }
  return out;
}

}  // namespace

EstimateResult parallel_matching(const Dataset& ds,
                                 const EstimatorOptions& opts) {
  if (ds.k() < 1)
    throw ValidationError("parallel matching requires covariates");
  auto [ds0, ds1] = split_by_treatment(ds);
  for (const Dataset* sub : {&ds0, &ds1}) {
    const int s_sum = sub->s.sum();
    if (s_sum == 0 || s_sum == sub->n())
      throw ValidationError(
          "single-level moderator within a treatment subset");
  }
  const MatchedEffect e0 = matched_effect(ds0);
  const MatchedEffect e1 = matched_effect(ds1);

  EstimateResult r;
  r.method = Method::ParallelMatching;
  r.estimate = e1.effect - e0.effect;
  r.variance = e0.var + e1.var;
  r.subset_components =
      SubsetComponents{e0.effect, e0.var, e1.effect, e1.var};
  r.cell_counts = count_cells(ds);
  r.diagnostics["estimand"] = "atme-for-the-moderated";
  auto max_mult = [](const MatchSet& m) {
    std::size_t mx = 0;
    for (const auto& [idx, mult] : m.multiplicity) mx = std::max(mx, mult);
    return mx;
  };
  r.diagnostics["max_multiplicity_t0"] = std::to_string(max_mult(e0.matches));
  r.diagnostics["max_multiplicity_t1"] = std::to_string(max_mult(e1.matches));
  if (e0.matches.ridge > 0.0 || e1.matches.ridge > 0.0)
    r.diagnostics["covariance_ridge"] =
        std::to_string(std::max(e0.matches.ridge, e1.matches.ridge));

  const BalanceReport bal = balance_table(ds, &e0.matches, &e1.matches);
  for (const auto& entry : bal.entries) {
    std::ostringstream os;
    os << entry.smd_before_t0 << "," << entry.smd_before_t1 << ","
       << (entry.smd_after_t0 ? *entry.smd_after_t0 : 0.0) << ","
       << (entry.smd_after_t1 ? *entry.smd_after_t1 : 0.0);
    r.diagnostics["smd:" + entry.covariate] = os.str();
  }
  finalize_result(r, opts.level);
  return r;
}

EstimateResult propensity_weighting(const Dataset& ds, const PSpec& p_spec,
                                    const PiSpec& pi_spec,
                                    const EstimatorOptions& opts) {
  const Eigen::Index n = ds.n();

  double p;
  if (std::holds_alternative<KnownP>(p_spec)) {
    p = std::get<KnownP>(p_spec).value;
    if (p <= 0.0 || p >= 1.0)
      throw ValidationError("treatment probability must be in (0,1)");
  } else {
    p = ds.t.cast<double>().mean();
  }

  Eigen::VectorXd pi(n);
  if (std::holds_alternative<KnownPi>(pi_spec)) {
    const auto& fn = std::get<KnownPi>(pi_spec).fn;
    for (Eigen::Index i = 0; i < n; ++i) pi[i] = fn(ds.x.row(i));
  } else {
    Eigen::MatrixXd design(n, ds.k() + 1);
    design.col(0).setOnes();
    if (ds.k() > 0) design.rightCols(ds.k()) = ds.x;
    const LogisticFit fit = logistic_fit(design, ds.s.cast<double>());
    for (Eigen::Index i = 0; i < n; ++i) pi[i] = fit.predict(design.row(i));
  }

  std::size_t trimmed = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (pi[i] < opts.trim_lo || pi[i] > opts.trim_hi) {
      pi[i] = std::clamp(pi[i], opts.trim_lo, opts.trim_hi);
      ++trimmed;
    }
  }

  Eigen::VectorXd summand(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double num = ds.y[i] * (ds.t[i] - p) * (ds.s[i] - pi[i]);
    summand[i] = num / (p * (1.0 - p) * pi[i] * (1.0 - pi[i]));
  }

  EstimateResult r;
  r.method = Method::PropensityWeighting;
  r.estimate = summand.mean();
  if (n > 1)
    r.variance = (summand.array() - r.estimate).square().sum() /
                 (static_cast<double>(n - 1) * static_cast<double>(n));
  r.cell_counts = count_cells(ds);
  r.diagnostics["p"] = std::to_string(p);
  r.diagnostics["trimmed_rows"] = std::to_string(trimmed);
  {
    std::ostringstream os;
    os << pi.minCoeff() << "," << pi.maxCoeff();
    r.diagnostics["propensity_range"] = os.str();
  }
  finalize_result(r, opts.level);
  return r;
}

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  double wsum = 0.0;
};

Moments weighted_moments(const std::vector<double>& v,
                         const std::vector<double>& w) {
  Moments m;
  for (std::size_t i = 0; i < v.size(); ++i) {
    m.wsum += w[i];
    m.mean += w[i] * v[i];
  }
  if (m.wsum <= 0.0) return m;
  m.mean /= m.wsum;
  for (std::size_t i = 0; i < v.size(); ++i)
    m.var += w[i] * (v[i] - m.mean) * (v[i] - m.mean);
  m.var /= m.wsum;
  return m;
}

}  // namespace

BalanceReport balance_table(const Dataset& ds, const MatchSet* matches_t0,
                            const MatchSet* matches_t1) {
  if (ds.k() < 1)
    throw ValidationError("balance table requires covariates");
  auto [ds0, ds1] = split_by_treatment(ds);
  BalanceReport rep;
  rep.n_t0 = static_cast<std::size_t>(ds0.n());
  rep.n_t1 = static_cast<std::size_t>(ds1.n());

  auto smd_before = [](const Dataset& sub, Eigen::Index j, bool& ok,
                       bool& zero_var) {
    std::vector<double> v1, v0;
    for (Eigen::Index i = 0; i < sub.n(); ++i)
      (sub.s[i] == 1 ? v1 : v0).push_back(sub.x(i, j));
    const Moments m1 = weighted_moments(v1, std::vector<double>(v1.size(), 1.0));
    const Moments m0 = weighted_moments(v0, std::vector<double>(v0.size(), 1.0));
    const double pooled = std::sqrt((m1.var + m0.var) / 2.0);
    if (pooled < 1e-14) {
      zero_var = true;
      if (std::abs(m1.mean - m0.mean) < 1e-14) return 0.0;
      ok = false;
      return 0.0;
    }
    return (m1.mean - m0.mean) / pooled;
  };

  auto smd_after = [](const Dataset& sub, const MatchSet& matches,
                      Eigen::Index j) {
    std::vector<double> vt, vc, wt, wc;
    for (const auto& p : matches.pairs) {
      vt.push_back(sub.x(static_cast<Eigen::Index>(p.target_index), j));
      wt.push_back(1.0);
    }
    for (const auto& [idx, mult] : matches.multiplicity) {
      vc.push_back(sub.x(static_cast<Eigen::Index>(idx), j));
      wc.push_back(static_cast<double>(mult));
    }
    const Moments mt = weighted_moments(vt, wt);
    const Moments mc = weighted_moments(vc, wc);
    const double pooled = std::sqrt((mt.var + mc.var) / 2.0);
    if (pooled < 1e-14) return 0.0;
    return (mt.mean - mc.mean) / pooled;
  };

  for (Eigen::Index j = 0; j < ds.k(); ++j) {
    BalanceEntry e;
    e.covariate =
        ds.covariate_names.size() > static_cast<std::size_t>(j)
            ? ds.covariate_names[static_cast<std::size_t>(j)]
            : "x" + std::to_string(j);
    bool zero_var = false;
    e.smd_before_t0 = smd_before(ds0, j, e.computable, zero_var);
    e.smd_before_t1 = smd_before(ds1, j, e.computable, zero_var);
    if (matches_t0) e.smd_after_t0 = smd_after(ds0, *matches_t0, j);
    if (matches_t1) e.smd_after_t1 = smd_after(ds1, *matches_t1, j);
    rep.entries.push_back(std::move(e));
  }

  auto effective_n = [](const MatchSet* m, std::size_t fallback) {
    if (!m) return static_cast<double>(fallback);
    double wsum = 0.0, w2sum = 0.0;
    for (const auto& [idx, mult] : m->multiplicity) {
      const double w = static_cast<double>(mult);
      wsum += w;
      w2sum += w * w;
    }
    return w2sum > 0.0 ? wsum * wsum / w2sum
                       : static_cast<double>(fallback);
  };
  rep.effective_n_t0 = effective_n(matches_t0, rep.n_t0);
  rep.effective_n_t1 = effective_n(matches_t1, rep.n_t1);
  return rep;
}

EstimatorRegistry& EstimatorRegistry::instance() {
  static EstimatorRegistry reg;
  return reg;
}

EstimatorRegistry::EstimatorRegistry() {
  fns_["subset-difference"] = [](const Dataset& d,
                                 const EstimatorOptions& o) {
    return subset_difference(d, o);
  };
  fns_["controlled-interaction"] = [](const Dataset& d,
                                      const EstimatorOptions& o) {
    return controlled_interaction(d, o);
  };
  fns_["parallel-regression"] = [](const Dataset& d,
                                   const EstimatorOptions& o) {
    return parallel_regression(d, o);
  };
  fns_["full-interaction"] = [](const Dataset& d,
                                const EstimatorOptions& o) {
    return full_interaction(d, o);
  };
  fns_["parallel-matching"] = [](const Dataset& d,
                                 const EstimatorOptions& o) {
    return parallel_matching(d, o);
  };
  fns_["propensity-weighting"] = [](const Dataset& d,
                                    const EstimatorOptions& o) {
    return propensity_weighting(d, PFromData{}, LogisticOnX{}, o);
  };
}

void EstimatorRegistry::register_estimator(const std::string& name,
                                           EstimatorFn fn) {
  fns_[name] = std::move(fn);
}

EstimatorFn EstimatorRegistry::find(const std::string& name) const {
  const auto it = fns_.find(name);
  if (it == fns_.end())
    throw ValidationError("unknown estimator '" + name + "'");
  return it->second;
}

std::vector<std::string> EstimatorRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, fn] : fns_) out.push_back(name);
  return out;
}

}  // namespace atme
