#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "atme/dataset.hpp"
#include "atme/estimators.hpp"

namespace atme {

struct XStandardNormal {};
struct XUniform {
  double lo = 0.0, hi = 1.0;
};
struct XDiscrete {
  std::vector<double> levels;
  std::vector<double> probs;  // must sum to 1
};
using XModel = std::variant<XStandardNormal, XUniform, XDiscrete>;

/// Structural model Y = alpha + tau T + omega S + beta X + delta T S
///                     + xi T X + eps, with a single covariate X,
/// T ~ Bernoulli(p_treat) independent of (S, X), and
/// S ~ Bernoulli(logistic(s_a + s_b X)).
struct DgpConfig {
  double alpha = 0.0;
  double tau = 1.0;
  double omega = 1.0;
  double beta = 1.0;
  double delta = 2.0;
  double xi = 0.0;
  double sigma_eps = 1.0;
  double p_treat = 0.5;
  double s_a = 0.0;
  double s_b = 1.0;
  XModel x_model = XStandardNormal{};
  std::size_t n = 1000;
  std::uint64_t seed = 1;

  void validate() const;  // throws ValidationError
};

/// Draws a dataset from the structural model. Deterministic given the
/// seed: the draw order is (X_i, T_i, S_i, eps_i) per row on a single
/// xoshiro256++ stream.
Dataset generate(const DgpConfig& cfg);

/// The ATME of the structural model, which is the coefficient delta.
double true_atme(const DgpConfig& cfg);

/// Population probability limit of the controlled-interaction T*S
/// coefficient, minus delta. Discrete X: exact enumeration of the
/// 8-cell (T,S,X-level) design distribution. Continuous X: least
/// squares projection on one large simulated draw.
struct OracleBias {
  double bias = 0.0;
  std::string path;  // "enumeration" or "large-n"
};
OracleBias oracle_controlled_interaction_bias(const DgpConfig& cfg,
                                              std::size_t large_n = 2000000);

struct EstimatorSummary {
  std::string name;
  std::size_t replications = 0;  // successful
  std::size_t failures = 0;
  double mean_estimate = 0.0;
  double bias = 0.0;  // mean_estimate - true delta
  double empirical_sd = 0.0;
  double mean_std_error = 0.0;
  double ci_coverage = 0.0;  // share of CIs covering true delta
};

struct MonteCarloReport {
  DgpConfig config;
  std::size_t requested_reps = 0;
  std::uint64_t master_seed = 0;
  std::string seed_rule = "splitmix64(master ^ golden*(rep+1))";
  std::vector<EstimatorSummary> estimators;
};

/// Runs `reps` replications, each on a dataset generated with a seed
/// derived from (cfg.seed, rep). Estimator failures on degenerate draws
/// are counted, never imputed. `threads` <= 0 means hardware
/// concurrency; output is identical for any thread count (aggregation
/// happens in replication order).
MonteCarloReport monte_carlo(const DgpConfig& cfg, std::size_t reps,
                             const std::vector<std::string>& estimator_names,
                             const EstimatorOptions& opts = {},
                             int threads = 0);

}  // namespace atme
