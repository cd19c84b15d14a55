#include "atme/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "atme/logistic.hpp"
#include "atme/normal.hpp"

namespace atme {

std::string method_name(Method m) {
  switch (m) {
    case Method::SubsetDifference:
      return "subset-difference";
    case Method::ControlledInteraction:
      return "controlled-interaction";
    case Method::ParallelRegression:
      return "parallel-regression";
    case Method::FullInteraction:
      return "full-interaction";
    case Method::ParallelMatching:
      return "parallel-matching";
    case Method::PropensityWeighting:
      return "propensity-weighting";
  }
  return "unknown";
}

CellCounts count_cells(const Dataset& ds) {
  CellCounts c;
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    if (ds.t[i] == 0)
      ++(ds.s[i] == 0 ? c.t0s0 : c.t0s1);
    else
      ++(ds.s[i] == 0 ? c.t1s0 : c.t1s1);
  }
  return c;
}

void finalize_result(EstimateResult& r, double level) {
  r.level = level;
  r.std_error = std::sqrt(r.variance);
  const double z = normal_quantile(0.5 + level / 2.0);
  r.ci_lower = r.estimate - z * r.std_error;
  r.ci_upper = r.estimate + z * r.std_error;
}

namespace {

const std::vector<double>& find_column(
    const std::vector<std::string>& names,
    const std::vector<std::vector<double>>& columns, const std::string& name,
    const char* role) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return columns[i];
  throw ValidationError(std::string("missing ") + role + " column '" + name +
                        "'");
}

bool is_binary_value(double v) { return v == 0.0 || v == 1.0; }

}  // namespace

Dataset bind_dataset(const std::vector<std::string>& names,
                     const std::vector<std::vector<double>>& columns,
                     const RoleMap& roles, const BindOptions& opts,
                     const std::vector<std::string>* cluster_labels) {
  if (names.size() != columns.size())
    throw ValidationError("column name/value count mismatch");
  if (roles.outcome.empty() || roles.treatment.empty() ||
      roles.moderator.empty())
    throw ValidationError("roles must name an outcome, treatment, moderator");

  const auto& yc = find_column(names, columns, roles.outcome, "outcome");
  const auto& tc = find_column(names, columns, roles.treatment, "treatment");
  const auto& sc = find_column(names, columns, roles.moderator, "moderator");
  std::vector<const std::vector<double>*> xcs;
  for (const auto& cname : roles.covariates)
    xcs.push_back(&find_column(names, columns, cname, "covariate"));

  const std::size_t n_raw = yc.size();
  if (tc.size() != n_raw || sc.size() != n_raw)
    throw ValidationError("column length mismatch");
  for (const auto* xc : xcs)
    if (xc->size() != n_raw) throw ValidationError("column length mismatch");
  if (!roles.cluster.empty() &&
      (cluster_labels == nullptr || cluster_labels->size() != n_raw))
    throw ValidationError("cluster role named but labels missing or wrong "
                          "length");

  std::vector<std::size_t> keep;
  keep.reserve(n_raw);
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < n_raw; ++i) {
    bool finite = std::isfinite(yc[i]) && std::isfinite(tc[i]) &&
                  std::isfinite(sc[i]);
    for (const auto* xc : xcs) finite = finite && std::isfinite((*xc)[i]);
    if (finite) {
      keep.push_back(i);
    } else if (opts.drop_missing) {
      ++dropped;
    } else {
      if (!std::isfinite(yc[i]))
        throw ValidationError("missing/non-finite outcome at row " +
                              std::to_string(i));
      throw ValidationError("missing/non-finite value at row " +
                            std::to_string(i));
    }
  }
  if (keep.empty()) throw ValidationError("no complete rows");

  const auto n = static_cast<Eigen::Index>(keep.size());
  Dataset ds;
  ds.y.resize(n);
  ds.t.resize(n);
  ds.s.resize(n);
  ds.x.resize(n, static_cast<Eigen::Index>(xcs.size()));
  ds.covariate_names = roles.covariates;
  ds.source_rows = keep;
  ds.dropped_rows = dropped;
  if (!roles.cluster.empty()) {
    std::vector<std::string> cl;
    cl.reserve(keep.size());
    for (auto i : keep) cl.push_back((*cluster_labels)[i]);
    ds.cluster = std::move(cl);
  }

  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t i = keep[static_cast<std::size_t>(r)];
    if (!is_binary_value(tc[i]))
      throw ValidationError("non-binary treatment at row " +
                            std::to_string(i));
    if (!is_binary_value(sc[i]))
      throw ValidationError("non-binary moderator at row " +
                            std::to_string(i));
    ds.y[r] = yc[i];
    ds.t[r] = static_cast<int>(tc[i]);
    ds.s[r] = static_cast<int>(sc[i]);
    for (std::size_t j = 0; j < xcs.size(); ++j)
      ds.x(r, static_cast<Eigen::Index>(j)) = (*xcs[j])[i];
  }

  const int t_sum = ds.t.sum();
  if (t_sum == 0 || t_sum == n)
    throw ValidationError("empty treatment arm");
  const int s_sum = ds.s.sum();
  if (s_sum == 0 || s_sum == n)
    throw ValidationError("empty moderator arm");

  return ds;
}

namespace {

Dataset take_rows(const Dataset& ds, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.y.resize(n);
  out.t.resize(n);
  out.s.resize(n);
  out.x.resize(n, ds.k());
  out.covariate_names = ds.covariate_names;
  if (ds.cluster) out.cluster.emplace();
  out.source_rows.reserve(rows.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index i = rows[static_cast<std::size_t>(r)];
    out.y[r] = ds.y[i];
    out.t[r] = ds.t[i];
    out.s[r] = ds.s[i];
    out.x.row(r) = ds.x.row(i);
    out.source_rows.push_back(ds.source_rows[static_cast<std::size_t>(i)]);
    if (ds.cluster)
      out.cluster->push_back((*ds.cluster)[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> split_by_treatment(const Dataset& ds) {
  std::vector<Eigen::Index> rows0, rows1;
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    (ds.t[i] == 0 ? rows0 : rows1).push_back(i);
  return {take_rows(ds, rows0), take_rows(ds, rows1)};
}

SupportReport check_common_support(const Dataset& ds, double epsilon) {
  SupportReport rep;
  rep.epsilon = epsilon;
  rep.cell_counts = count_cells(ds);
  rep.empty_cell = rep.cell_counts.any_empty();

  auto [ds0, ds1] = split_by_treatment(ds);
  auto scan = [&](const Dataset& sub, double& lo, double& hi,
                  bool& separated) {
    if (sub.n() == 0) {
      lo = hi = 0.0;
      return;
    }
    if (sub.k() == 0) {
      lo = hi = sub.s.cast<double>().mean();
      return;
    }
    Eigen::MatrixXd design(sub.n(), sub.k() + 1);
    design.col(0).setOnes();
    design.rightCols(sub.k()) = sub.x;
    try {
      LogisticOptions lopts;
      lopts.throw_on_separation = false;
      const LogisticFit fit =
          logistic_fit(design, sub.s.cast<double>(), lopts);
      separated = fit.separation;
      lo = 1.0;
      hi = 0.0;
      for (Eigen::Index i = 0; i < sub.n(); ++i) {
        const double p = fit.predict(design.row(i));
        lo = std::min(lo, p);
        hi = std::max(hi, p);
      }
    } catch (const NumericError&) {
      separated = true;
      lo = hi = 0.5;
    }
  };
  scan(ds0, rep.prop_min_t0, rep.prop_max_t0, rep.separation_t0);
  scan(ds1, rep.prop_min_t1, rep.prop_max_t1, rep.separation_t1);

  rep.within_bounds =
      rep.prop_min_t0 >= epsilon && rep.prop_max_t0 <= 1.0 - epsilon &&
      rep.prop_min_t1 >= epsilon && rep.prop_max_t1 <= 1.0 - epsilon;
  return rep;
}

}  // namespace atme
