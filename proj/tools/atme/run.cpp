#include "atme/run.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "atme/csv.hpp"
#include "atme/estimators.hpp"
#include "atme/report.hpp"
#include "atme/sensitivity.hpp"
#include "atme/simulation.hpp"

namespace atme::cli {

namespace {

using nlohmann::json;

struct Options {
  // shared
  std::string data;
  std::string outcome, treatment, moderator, cluster;
  std::string covariates;  // comma-separated
  std::string out;
  std::string format = "json";
  std::string variance = "hc1";
  double level = 0.95;
  bool drop_missing = false;
  std::uint64_t seed = 1;
  int threads = 0;

  // estimate
  std::string method = "parallel-regression";
  double p_known = -1.0;  // <0 = estimate from data

  // simulate
  double alpha = 0.0, tau = 1.0, omega = 1.0, beta = 1.0, delta = 2.0,
         xi = 0.0, sigma = 1.0, p_treat = 0.5, sa = 0.0, sb = 1.0;
  std::string x_model = "normal";
  std::size_t n = 1000, reps = 1000;
  std::string methods = "parallel-regression,controlled-interaction";

  // sensitivity
  std::string alpha_grid, kappa_grid;
  double fraction = -1.0;  // <0 = grid mode
  std::string split = "symmetric";
  double tolerance = 1e-4;

  // diagnose
  double epsilon = 0.01;
};

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  // "lo:hi:step", "a,b,c", or a single value
  if (text.find(':') != std::string::npos) {
    double lo, hi, step;
    if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 ||
        step <= 0.0)
      throw ValidationError("bad grid spec '" + text + "'");
    std::vector<double> out;
    for (double v = lo; v <= hi + 1e-12 * std::max(1.0, std::abs(hi));
         v += step)
      out.push_back(v);
    return out;
  }
  std::vector<double> out;
  for (const auto& item : split_commas(text)) out.push_back(std::stod(item));
  if (out.empty()) throw ValidationError("empty grid spec");
  return out;
}

VarianceMode parse_variance(const std::string& name) {
  if (name == "classical") return VarianceMode::Classical;
  if (name == "hc1") return VarianceMode::HeteroskedasticityRobust;
  if (name == "cluster") return VarianceMode::ClusterRobust;
  throw ValidationError("unknown variance mode '" + name + "'");
}

RoleMap make_roles(const Options& o) {
  RoleMap roles;
  roles.outcome = o.outcome;
  roles.treatment = o.treatment;
  roles.moderator = o.moderator;
  roles.covariates = split_commas(o.covariates);
  roles.cluster = o.cluster;
  return roles;
}

void emit(const std::string& body, const std::string& out) {
  if (out.empty())
    std::cout << body;
  else
    write_text_file(out, body);
}

/// Applies a JSON config file onto the defaults; flags parsed afterwards
/// override these values.
void apply_config(Options& o, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("bad config JSON: " + std::string(e.what()));
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("data", o.data);
  get("outcome", o.outcome);
  get("treatment", o.treatment);
  get("moderator", o.moderator);
  get("covariates", o.covariates);
  get("cluster", o.cluster);
  get("out", o.out);
  get("format", o.format);
  get("variance", o.variance);
  get("level", o.level);
  get("drop-missing", o.drop_missing);
  get("seed", o.seed);
  get("threads", o.threads);
  get("method", o.method);
  get("p", o.p_known);
  get("alpha", o.alpha);
  get("tau", o.tau);
  get("omega", o.omega);
  get("beta", o.beta);
  get("delta", o.delta);
  get("xi", o.xi);
  get("sigma", o.sigma);
  get("p-treat", o.p_treat);
  get("sa", o.sa);
  get("sb", o.sb);
  get("x-model", o.x_model);
  get("n", o.n);
  get("reps", o.reps);
  get("methods", o.methods);
  get("alpha-grid", o.alpha_grid);
  get("kappa-grid", o.kappa_grid);
  get("fraction", o.fraction);
  get("split", o.split);
  get("tolerance", o.tolerance);
  get("epsilon", o.epsilon);
}

void add_role_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--data", o.data, "input CSV path");
  cmd->add_option("--outcome", o.outcome, "outcome column");
  cmd->add_option("--treatment", o.treatment, "treatment column");
  cmd->add_option("--moderator", o.moderator, "moderator column");
  cmd->add_option("--covariates", o.covariates,
                  "comma-separated covariate columns");
  cmd->add_option("--cluster", o.cluster, "cluster label column");
  cmd->add_flag("--drop-missing", o.drop_missing,
                "drop rows with missing values instead of failing");
}

void add_output_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--out", o.out, "output path (default stdout)");
  cmd->add_option("--format", o.format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
}

int cmd_estimate(const Options& o) {
  const Dataset ds =
      read_csv(o.data, make_roles(o), BindOptions{o.drop_missing});
  EstimatorOptions eopts;
  eopts.variance = !o.cluster.empty() && o.variance == "hc1"
                       ? VarianceMode::ClusterRobust
                       : parse_variance(o.variance);
  eopts.level = o.level;

  EstimateResult result;
  if (o.method == "propensity-weighting" && o.p_known > 0.0) {
    result = propensity_weighting(ds, KnownP{o.p_known}, LogisticOnX{},
                                  eopts);
  } else {
    result = EstimatorRegistry::instance().find(o.method)(ds, eopts);
  }

  if (o.format == "json")
    emit(to_json(result, o.seed).dump(2) + "\n", o.out);
  else
    emit(to_csv(result), o.out);
  return 0;
}

int cmd_simulate(const Options& o) {
  DgpConfig cfg;
  cfg.alpha = o.alpha;
  cfg.tau = o.tau;
  cfg.omega = o.omega;
  cfg.beta = o.beta;
  cfg.delta = o.delta;
  cfg.xi = o.xi;
  cfg.sigma_eps = o.sigma;
  cfg.p_treat = o.p_treat;
  cfg.s_a = o.sa;
  cfg.s_b = o.sb;
  cfg.x_model = parse_x_model(o.x_model);
  cfg.n = o.n;
  cfg.seed = o.seed;

  EstimatorOptions eopts;
  eopts.variance = parse_variance(o.variance);
  eopts.level = o.level;
  const MonteCarloReport report =
      monte_carlo(cfg, o.reps, split_commas(o.methods), eopts, o.threads);

  if (o.format == "json")
    emit(to_json(report).dump(2) + "\n", o.out);
  else
    emit(to_csv(report), o.out);
  return 0;
}

int cmd_sensitivity(const Options& o) {
  const Dataset ds =
      read_csv(o.data, make_roles(o), BindOptions{o.drop_missing});
  const KappaSplit split =
      o.split == "anchored" ? KappaSplit::Anchored : KappaSplit::Symmetric;
  if (o.alpha_grid.empty())
    throw ValidationError("--alpha-grid is required");
  const std::vector<double> alphas = parse_grid(o.alpha_grid);

  if (o.fraction > 0.0) {
    LevelCurveOptions lopts;
    lopts.tolerance = o.tolerance;
    lopts.split = split;
    const LevelCurve curve = level_curve(ds, o.fraction, alphas, lopts);
    if (o.format == "json")
      emit(to_json(curve).dump(2) + "\n", o.out);
    else
      emit(to_csv(curve), o.out);
    return 0;
  }

  if (o.kappa_grid.empty())
    throw ValidationError("--kappa-grid is required in grid mode");
  const SensitivityGrid grid = sensitivity_grid(
      ds, alphas, parse_grid(o.kappa_grid), split, o.threads);
  const double delta_hat = parallel_regression(ds).estimate;
  if (o.format == "json")
    emit(to_json(grid, delta_hat).dump(2) + "\n", o.out);
  else
    emit(to_csv(grid, delta_hat), o.out);
  return 0;
}

int cmd_diagnose(const Options& o) {
  const Dataset ds =
      read_csv(o.data, make_roles(o), BindOptions{o.drop_missing});
  const SupportReport report = check_common_support(ds, o.epsilon);
  if (o.format == "json")
    emit(to_json(report).dump(2) + "\n", o.out);
  else
    emit(to_json(report).dump(2) + "\n", o.out);  // no CSV form
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  Options o;

  // config file provides defaults; explicit flags override
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        apply_config(o, argv[i + 1]);
      } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
      }
    }
  }

  CLI::App app{"ATME estimation toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flag defaults)")
      ->expected(1);

  auto* est = app.add_subcommand("estimate", "estimate an ATME from a CSV");
  add_role_flags(est, o);
  add_output_flags(est, o);
  est->add_option("--method", o.method, "estimator name");
  est->add_option("--variance", o.variance, "classical, hc1, or cluster");
  est->add_option("--level", o.level, "confidence level");
  est->add_option("--p", o.p_known,
                  "design-known treatment probability (weighting only)");
  est->add_option("--seed", o.seed, "seed recorded in the report");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo bias study");
  add_output_flags(sim, o);
  sim->add_option("--alpha", o.alpha, "DGP intercept");
  sim->add_option("--tau", o.tau, "treatment main effect");
  sim->add_option("--omega", o.omega, "moderator main effect");
  sim->add_option("--beta", o.beta, "covariate main effect");
  sim->add_option("--delta", o.delta, "true moderation effect");
  sim->add_option("--xi", o.xi, "treatment-covariate interaction");
  sim->add_option("--sigma", o.sigma, "noise SD");
  sim->add_option("--p-treat", o.p_treat, "treatment probability");
  sim->add_option("--sa", o.sa, "moderator model intercept");
  sim->add_option("--sb", o.sb, "moderator model slope on x");
  sim->add_option("--x-model", o.x_model,
                  "normal | uniform:lo,hi | discrete:v:p,...");
  sim->add_option("--n", o.n, "rows per replication");
  sim->add_option("--reps", o.reps, "replications");
  sim->add_option("--seed", o.seed, "master seed");
  sim->add_option("--methods", o.methods, "comma-separated estimators");
  sim->add_option("--variance", o.variance, "classical, hc1, or cluster");
  sim->add_option("--level", o.level, "confidence level");
  sim->add_option("--threads", o.threads, "worker threads (0 = all cores)");

  auto* sens = app.add_subcommand("sensitivity",
                                  "unobserved-confounder sensitivity");
  add_role_flags(sens, o);
  add_output_flags(sens, o);
  sens->add_option("--alpha-grid", o.alpha_grid, "lo:hi:step or list");
  sens->add_option("--kappa-grid", o.kappa_grid, "lo:hi:step or list");
  sens->add_option("--fraction", o.fraction,
                   "level-curve target fraction of the estimate");
  sens->add_option("--split", o.split, "symmetric or anchored kappa split");
  sens->add_option("--tolerance", o.tolerance, "level-curve tolerance");
  sens->add_option("--seed", o.seed, "seed recorded in the report");
  sens->add_option("--threads", o.threads, "worker threads (0 = all cores)");

  auto* diag = app.add_subcommand("diagnose", "common-support diagnostics");
  add_role_flags(diag, o);
  add_output_flags(diag, o);
  diag->add_option("--epsilon", o.epsilon, "support flagging threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (est->parsed()) return cmd_estimate(o);
    if (sim->parsed()) return cmd_simulate(o);
    if (sens->parsed()) return cmd_sensitivity(o);
    if (diag->parsed()) return cmd_diagnose(o);
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace atme::cli
