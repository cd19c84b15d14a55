#include "atme/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace atme::cli {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json to_json(const EstimateResult& r, std::uint64_t seed) {
  json j;
  j["method"] = method_name(r.method);
  j["estimate"] = r.estimate;
  j["variance"] = r.variance;
  j["std_error"] = r.std_error;
  j["ci_lower"] = r.ci_lower;
  j["ci_upper"] = r.ci_upper;
  j["level"] = r.level;
  if (r.subset_components) {
    j["subset_components"] = {{"gamma0", r.subset_components->gamma0},
                              {"var0", r.subset_components->var0},
                              {"gamma1", r.subset_components->gamma1},
                              {"var1", r.subset_components->var1}};
  } else {
    j["subset_components"] = nullptr;
  }
  j["cell_counts"] = {{"t0s0", r.cell_counts.t0s0},
                      {"t0s1", r.cell_counts.t0s1},
                      {"t1s0", r.cell_counts.t1s0},
                      {"t1s1", r.cell_counts.t1s1}};
  j["diagnostics"] = r.diagnostics;
  j["tool_version"] = kToolVersion;
  j["seed"] = seed;
  return j;
}

json to_json(const SupportReport& r) {
  json j;
  j["cell_counts"] = {{"t0s0", r.cell_counts.t0s0},
                      {"t0s1", r.cell_counts.t0s1},
                      {"t1s0", r.cell_counts.t1s0},
                      {"t1s1", r.cell_counts.t1s1}};
  j["propensity_range_t0"] = {r.prop_min_t0, r.prop_max_t0};
  j["propensity_range_t1"] = {r.prop_min_t1, r.prop_max_t1};
  j["empty_cell"] = r.empty_cell;
  j["within_bounds"] = r.within_bounds;
  j["separation_t0"] = r.separation_t0;
  j["separation_t1"] = r.separation_t1;
  j["epsilon"] = r.epsilon;
  j["tool_version"] = kToolVersion;
  return j;
}

json to_json(const DgpConfig& cfg) {
  json j;
  j["alpha"] = cfg.alpha;
  j["tau"] = cfg.tau;
  j["omega"] = cfg.omega;
  j["beta"] = cfg.beta;
  j["delta"] = cfg.delta;
  j["xi"] = cfg.xi;
  j["sigma_eps"] = cfg.sigma_eps;
  j["p_treat"] = cfg.p_treat;
  j["s_a"] = cfg.s_a;
  j["s_b"] = cfg.s_b;
  j["x_model"] = x_model_to_string(cfg.x_model);
  j["n"] = cfg.n;
  j["seed"] = cfg.seed;
  return j;
}

json to_json(const MonteCarloReport& r) {
  json j;
  j["config"] = to_json(r.config);
  j["requested_reps"] = r.requested_reps;
  j["master_seed"] = r.master_seed;
  j["seed_rule"] = r.seed_rule;
  j["true_delta"] = r.config.delta;
  json ests = json::array();
  for (const auto& e : r.estimators) {
    ests.push_back({{"name", e.name},
                    {"replications", e.replications},
                    {"failures", e.failures},
                    {"mean_estimate", e.mean_estimate},
                    {"bias", e.bias},
                    {"empirical_sd", e.empirical_sd},
                    {"mean_std_error", e.mean_std_error},
                    {"ci_coverage", e.ci_coverage}});
  }
  j["estimators"] = ests;
  j["tool_version"] = kToolVersion;
  return j;
}

namespace {

json point_to_json(const SensitivityPoint& p, double residual) {
  return {{"alpha_tilde", p.spec.alpha_tilde},
          {"kappa0_tilde", p.spec.kappa0_tilde},
          {"kappa1_tilde", p.spec.kappa1_tilde},
          {"kappa_diff", p.spec.kappa_diff()},
          {"delta_adjusted", p.delta_adjusted},
          {"converged", p.converged},
          {"residual", residual}};
}

json references_to_json(const BenchmarkReferences& r) {
  json j;
  j["atme_reference"] = r.atme_reference;
  if (r.max_observed_selection) {
    j["max_observed_selection"] = *r.max_observed_selection;
    j["max_selection_covariate"] = *r.max_selection_covariate;
  } else {
    j["max_observed_selection"] = nullptr;
  }
  j["selection_separation"] = r.selection_separation;
  return j;
}

}  // namespace

json to_json(const SensitivityGrid& g, double delta_hat) {
  json j;
  j["alpha_grid"] = g.alpha_grid;
  j["kappa_diff_grid"] = g.kappa_diff_grid;
  j["delta_hat"] = delta_hat;
  json pts = json::array();
  for (const auto& p : g.points)
    pts.push_back(point_to_json(p, std::abs(p.delta_adjusted - delta_hat)));
  j["points"] = pts;
  j["tool_version"] = kToolVersion;
  return j;
}

json to_json(const LevelCurve& c) {
  json j;
  j["fraction"] = c.fraction;
  j["delta_hat"] = c.delta_hat;
  j["tolerance"] = c.tolerance;
  json pts = json::array();
  for (const auto& p : c.points)
    pts.push_back({{"alpha_tilde", p.alpha_tilde},
                   {"kappa_diff", p.kappa_diff},
                   {"delta_adjusted", p.delta_adjusted},
                   {"converged", p.converged},
                   {"residual", p.residual}});
  j["points"] = pts;
  j["unbracketed"] = c.unbracketed;
  j["references"] = references_to_json(c.references);
  j["tool_version"] = kToolVersion;
  return j;
}

std::string to_csv(const EstimateResult& r) {
  std::ostringstream os;
  os << "method,estimate,variance,std_error,ci_lower,ci_upper,level,"
        "gamma0,var0,gamma1,var1,t0s0,t0s1,t1s0,t1s1\n";
  os << method_name(r.method) << "," << format_double(r.estimate) << ","
     << format_double(r.variance) << "," << format_double(r.std_error) << ","
     << format_double(r.ci_lower) << "," << format_double(r.ci_upper) << ","
     << format_double(r.level) << ",";
  if (r.subset_components) {
    os << format_double(r.subset_components->gamma0) << ","
       << format_double(r.subset_components->var0) << ","
       << format_double(r.subset_components->gamma1) << ","
       << format_double(r.subset_components->var1);
  } else {
    os << ",,,";
  }
  os << "," << r.cell_counts.t0s0 << "," << r.cell_counts.t0s1 << ","
     << r.cell_counts.t1s0 << "," << r.cell_counts.t1s1 << "\n";
  return os.str();
}

std::string to_csv(const MonteCarloReport& r) {
  std::ostringstream os;
  os << "estimator,replications,failures,mean_estimate,bias,empirical_sd,"
        "mean_std_error,ci_coverage\n";
  for (const auto& e : r.estimators) {
    os << e.name << "," << e.replications << "," << e.failures << ","
       << format_double(e.mean_estimate) << "," << format_double(e.bias)
       << "," << format_double(e.empirical_sd) << ","
       << format_double(e.mean_std_error) << ","
       << format_double(e.ci_coverage) << "\n";
  }
  return os.str();
}

std::string to_csv(const SensitivityGrid& g, double delta_hat) {
  std::ostringstream os;
  os << "alpha_tilde,kappa_diff,delta_adjusted,converged,residual\n";
  for (const auto& p : g.points) {
    os << format_double(p.spec.alpha_tilde) << ","
       << format_double(p.spec.kappa_diff()) << ","
       << format_double(p.delta_adjusted) << ","
       << (p.converged ? "1" : "0") << ","
       << format_double(std::abs(p.delta_adjusted - delta_hat)) << "\n";
  }
  return os.str();
}

std::string to_csv(const LevelCurve& c) {
  std::ostringstream os;
  os << "alpha_tilde,kappa_diff,delta_adjusted,converged,residual\n";
  for (const auto& p : c.points) {
    os << format_double(p.alpha_tilde) << "," << format_double(p.kappa_diff)
       << "," << format_double(p.delta_adjusted) << ","
       << (p.converged ? "1" : "0") << "," << format_double(p.residual)
       << "\n";
  }
  return os.str();
}

XModel parse_x_model(const std::string& text) {
  if (text == "normal" || text.empty()) return XStandardNormal{};
  if (text.rfind("uniform:", 0) == 0) {
    XUniform u;
    if (std::sscanf(text.c_str(), "uniform:%lf,%lf", &u.lo, &u.hi) != 2)
      throw ValidationError("bad uniform x-model spec '" + text + "'");
    return u;
  }
  if (text.rfind("discrete:", 0) == 0) {
    XDiscrete d;
    std::istringstream is(text.substr(9));
    std::string item;
    while (std::getline(is, item, ',')) {
      double v, p;
      if (std::sscanf(item.c_str(), "%lf:%lf", &v, &p) != 2)
        throw ValidationError("bad discrete x-model item '" + item + "'");
      d.levels.push_back(v);
      d.probs.push_back(p);
    }
    if (d.levels.empty())
      throw ValidationError("empty discrete x-model spec");
    return d;
  }
  throw ValidationError("unknown x-model '" + text + "'");
}

std::string x_model_to_string(const XModel& m) {
  if (std::holds_alternative<XStandardNormal>(m)) return "normal";
  if (const auto* u = std::get_if<XUniform>(&m)) {
    std::ostringstream os;
    os << "uniform:" << format_double(u->lo) << "," << format_double(u->hi);
    return os.str();
  }
  const auto& d = std::get<XDiscrete>(m);
  std::ostringstream os;
  os << "discrete:";
  for (std::size_t i = 0; i < d.levels.size(); ++i) {
    if (i) os << ",";
    os << format_double(d.levels[i]) << ":" << format_double(d.probs[i]);
  }
  return os.str();
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << body;
}

}  // namespace atme::cli
