#include "atme/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "atme/least_squares.hpp"
#include "atme/logistic.hpp"
#include "atme/rng.hpp"

namespace atme {

void DgpConfig::validate() const {
  if (sigma_eps <= 0.0) throw ValidationError("sigma_eps must be positive");
  if (p_treat <= 0.0 || p_treat >= 1.0)
    throw ValidationError("p_treat must be in (0,1)");
  if (n == 0) throw ValidationError("n must be positive");
  if (const auto* d = std::get_if<XDiscrete>(&x_model)) {
    if (d->levels.empty() || d->levels.size() != d->probs.size())
      throw ValidationError("discrete x model needs matching levels/probs");
    double sum = 0.0;
    for (double p : d->probs) {
      if (p < 0.0) throw ValidationError("discrete probs must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ValidationError("discrete probs must sum to 1");
  }
  if (const auto* u = std::get_if<XUniform>(&x_model)) {
    if (!(u->lo < u->hi)) throw ValidationError("uniform bounds reversed");
  }
}

namespace {

double draw_x(Xoshiro256pp& rng, const XModel& model,
              const std::vector<double>& cum) {
  if (std::holds_alternative<XStandardNormal>(model)) return rng.normal();
  if (const auto* u = std::get_if<XUniform>(&model))
    return u->lo + (u->hi - u->lo) * rng.uniform();
  const auto& d = std::get<XDiscrete>(model);
  return d.levels[rng.discrete(cum)];
}

std::vector<double> cumulative(const XModel& model) {
  std::vector<double> cum;
  if (const auto* d = std::get_if<XDiscrete>(&model)) {
    double acc = 0.0;
    for (double p : d->probs) cum.push_back(acc += p);
  }
  return cum;
}

Dataset generate_with_seed(const DgpConfig& cfg, std::uint64_t seed) {
  Xoshiro256pp rng(seed);
  const auto n = static_cast<Eigen::Index>(cfg.n);
  const auto cum = cumulative(cfg.x_model);

  Dataset ds;
  ds.y.resize(n);
  ds.t.resize(n);
  ds.s.resize(n);
  ds.x.resize(n, 1);
  ds.covariate_names = {"x"};
  ds.source_rows.resize(cfg.n);
  std::iota(ds.source_rows.begin(), ds.source_rows.end(), 0);

  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = draw_x(rng, cfg.x_model, cum);
    const int t = rng.bernoulli(cfg.p_treat) ? 1 : 0;
    const int s = rng.bernoulli(logistic(cfg.s_a + cfg.s_b * x)) ? 1 : 0;
    const double eps = cfg.sigma_eps * rng.normal();
    ds.x(i, 0) = x;
    ds.t[i] = t;
    ds.s[i] = s;
    ds.y[i] = cfg.alpha + cfg.tau * t + cfg.omega * s + cfg.beta * x +
              cfg.delta * t * s + cfg.xi * t * x + eps;
  }
  return ds;
}

}  // namespace

Dataset generate(const DgpConfig& cfg) {
  cfg.validate();
  return generate_with_seed(cfg, cfg.seed);
}

double true_atme(const DgpConfig& cfg) {
  cfg.validate();
  return cfg.delta;
}

OracleBias oracle_controlled_interaction_bias(const DgpConfig& cfg,
                                              std::size_t large_n) {
  cfg.validate();
  OracleBias out;
  if (const auto* d = std::get_if<XDiscrete>(&cfg.x_model)) {
    // exact projection over the finite (T,S,X) design distribution
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(5, 5);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(5);
    for (std::size_t l = 0; l < d->levels.size(); ++l) {
      const double x = d->levels[l];
      const double ps1 = logistic(cfg.s_a + cfg.s_b * x);
      for (int t = 0; t <= 1; ++t) {
        const double pt = t == 1 ? cfg.p_treat : 1.0 - cfg.p_treat;
        for (int s = 0; s <= 1; ++s) {
          const double w = d->probs[l] * pt * (s == 1 ? ps1 : 1.0 - ps1);
          if (w == 0.0) continue;
          Eigen::VectorXd z(5);
          z << 1.0, t, s, x, static_cast<double>(t * s);
          const double ey = cfg.alpha + cfg.tau * t + cfg.omega * s +
                            cfg.beta * x + cfg.delta * t * s +
                            cfg.xi * t * x;
          m.noalias() += w * z * z.transpose();
          v.noalias() += w * ey * z;
        }
      }
    }
    const Eigen::VectorXd coef = m.ldlt().solve(v);
    out.bias = coef[4] - cfg.delta;
    out.path = "enumeration";
    return out;
  }

  DgpConfig big = cfg;
  big.n = large_n;
  const Dataset ds =
      generate_with_seed(big, derive_seed(cfg.seed, 0x0aceULL));
  Eigen::MatrixXd design(ds.n(), 5);
  design.col(0).setOnes();
  design.col(1) = ds.t.cast<double>();
  design.col(2) = ds.s.cast<double>();
  design.col(3) = ds.x.col(0);
  design.col(4) = ds.t.cast<double>().cwiseProduct(ds.s.cast<double>());
  const LinearFit fit = least_squares_fit(
      design, ds.y, VarianceMode::Classical,
      {"intercept", "t", "s", "x", "t:s"});
  out.bias = fit.coefficients[4] - cfg.delta;
  out.path = "large-n";
  return out;
}

namespace {

struct RepOutcome {
  bool ok = false;
  double estimate = 0.0;
  double std_error = 0.0;
  bool covered = false;
};

}  // namespace

MonteCarloReport monte_carlo(const DgpConfig& cfg, std::size_t reps,
                             const std::vector<std::string>& estimator_names,
                             const EstimatorOptions& opts, int threads) {
  cfg.validate();
  if (reps == 0) throw ValidationError("reps must be >= 1");
  if (estimator_names.empty())
    throw ValidationError("no estimators selected");

  auto& registry = EstimatorRegistry::instance();
  std::vector<EstimatorFn> fns;
  for (const auto& name : estimator_names) fns.push_back(registry.find(name));

  const double truth = true_atme(cfg);
  const std::size_t n_est = fns.size();
  std::vector<RepOutcome> outcomes(reps * n_est);

  auto run_rep = [&](std::size_t r) {
    const Dataset ds = generate_with_seed(cfg, derive_seed(cfg.seed, r));
    for (std::size_t e = 0; e < n_est; ++e) {
      RepOutcome& o = outcomes[r * n_est + e];
      try {
        const EstimateResult res = fns[e](ds, opts);
        o.ok = true;
        o.estimate = res.estimate;
        o.std_error = res.std_error;
        o.covered = res.ci_lower <= truth && truth <= res.ci_upper;
      } catch (const std::exception&) {
        o.ok = false;  // degenerate draw; counted, not imputed
      }
    }
  };

  unsigned int nthreads =
      threads > 0 ? static_cast<unsigned int>(threads)
                  : std::max(1u, std::thread::hardware_concurrency());
  nthreads = std::min<unsigned int>(nthreads,
                                    static_cast<unsigned int>(reps));
  if (nthreads <= 1) {
    for (std::size_t r = 0; r < reps; ++r) run_rep(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned int tix = 0; tix < nthreads; ++tix) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t r = next.fetch_add(1);
          if (r >= reps) return;
          run_rep(r);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  MonteCarloReport report;
  report.config = cfg;
  report.requested_reps = reps;
  report.master_seed = cfg.seed;

  // aggregation in replication order: identical for any thread count
  std::size_t total_failures = 0;
  for (std::size_t e = 0; e < n_est; ++e) {
    EstimatorSummary sum;
    sum.name = estimator_names[e];
    double mean = 0.0, se_mean = 0.0, cover = 0.0;
    std::vector<double> est;
    est.reserve(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      const RepOutcome& o = outcomes[r * n_est + e];
      if (!o.ok) {
        ++sum.failures;
        continue;
      }
      est.push_back(o.estimate);
      mean += o.estimate;
      se_mean += o.std_error;
      cover += o.covered ? 1.0 : 0.0;
    }
    sum.replications = est.size();
    total_failures += sum.failures;
    if (!est.empty()) {
      const double m = static_cast<double>(est.size());
      sum.mean_estimate = mean / m;
      sum.bias = sum.mean_estimate - truth;
      sum.mean_std_error = se_mean / m;
      sum.ci_coverage = cover / m;
      double ss = 0.0;
      for (double v : est)
        ss += (v - sum.mean_estimate) * (v - sum.mean_estimate);
      sum.empirical_sd = m > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
    }
    report.estimators.push_back(std::move(sum));
  }
  if (total_failures == reps * n_est)
    throw NumericError("all estimators failed on all replications");
  return report;
}

}  // namespace atme
