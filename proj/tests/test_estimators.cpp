#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "atme/estimators.hpp"
#include "atme/logistic.hpp"
#include "atme/rng.hpp"
#include "atme/simulation.hpp"
#include "support/oracles.hpp"

namespace {

/// Four-cell fixture with known cell means:
///   (T=0,S=0) -> {0, 2}   mean 1
///   (T=0,S=1) -> {2, 2}   mean 2
///   (T=1,S=0) -> {1, 1}   mean 1
///   (T=1,S=1) -> {3, 5}   mean 4
/// Cell-mean double difference: (4 - 1) - (2 - 1) = 2.
atme::Dataset cell_fixture() {
  atme::Dataset ds;
  ds.y.resize(8);
  ds.y << 0, 2, 2, 2, 1, 1, 3, 5;
  ds.t.resize(8);
  ds.t << 0, 0, 0, 0, 1, 1, 1, 1;
  ds.s.resize(8);
  ds.s << 0, 0, 1, 1, 0, 0, 1, 1;
  ds.x.resize(8, 0);
  ds.source_rows.resize(8);
  for (std::size_t i = 0; i < 8; ++i) ds.source_rows[i] = i;
  return ds;
}

atme::Dataset random_dataset(std::uint64_t seed, int n, int k,
                             double xi = 0.7) {
  atme::Xoshiro256pp rng(seed);
  atme::Dataset ds;
  ds.y.resize(n);
  ds.t.resize(n);
  ds.s.resize(n);
  ds.x.resize(n, k);
  for (int j = 0; j < k; ++j)
    ds.covariate_names.push_back("x" + std::to_string(j));
  ds.source_rows.resize(n);
  for (int i = 0; i < n; ++i) {
    ds.source_rows[i] = static_cast<std::size_t>(i);
    double xsum = 0.0;
    for (int j = 0; j < k; ++j) {
      ds.x(i, j) = rng.normal();
      xsum += ds.x(i, j);
    }
    const int t = rng.bernoulli(0.5) ? 1 : 0;
    const double first = k > 0 ? ds.x(i, 0) : 0.0;
    const int s = rng.bernoulli(atme::logistic(0.2 + first)) ? 1 : 0;
    ds.t[i] = t;
    ds.s[i] = s;
    ds.y[i] = 0.5 + t + 0.8 * s + 0.6 * xsum + 2.0 * t * s +
              xi * t * first + rng.normal();
  }
  return ds;
}

}  // namespace

TEST_CASE("subset difference reproduces the cell-mean double difference") {
  const auto r = atme::subset_difference(cell_fixture());
  CHECK(r.estimate == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.cell_counts.t1s1 == 2);
  CHECK(r.diagnostics.count("biased_for_atme") == 1);
}

TEST_CASE("full interaction equals parallel regression") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const int n = 60 + static_cast<int>(seed) * 10;
    const int k = static_cast<int>(seed % 5);
    const auto ds = random_dataset(seed, n, k);
    const auto pr = atme::parallel_regression(ds);
    const auto fr = atme::full_interaction(ds);
    const double scale = std::max(1.0, std::abs(pr.estimate));
    CHECK(std::abs(fr.estimate - pr.estimate) / scale < 1e-8);
    // the point estimates coincide exactly; the HC1 small-sample factors
    // differ (pooled vs per-subset degrees of freedom), so the variances
    // only agree to O(d/n)
    CHECK(fr.variance == doctest::Approx(pr.variance).epsilon(0.02));
  }
}

TEST_CASE("parallel regression matches per-subset oracle projections") {
  const auto ds = random_dataset(31, 300, 2);
  const auto r = atme::parallel_regression(ds);
  const auto [d0, d1] = atme::split_by_treatment(ds);
  auto gamma = [](const atme::Dataset& part) {
    Eigen::MatrixXd design(part.n(), 2 + part.k());
    design.col(0).setOnes();
    for (Eigen::Index i = 0; i < part.n(); ++i) {
      design(i, 1) = part.s[i];
      for (Eigen::Index j = 0; j < part.k(); ++j)
        design(i, 2 + j) = part.x(i, j);
    }
    return oracles::normal_equations(design, part.y)[1];
  };
  const double expected = gamma(d1) - gamma(d0);
  CHECK(r.estimate == doctest::Approx(expected).epsilon(1e-9));
  REQUIRE(r.subset_components.has_value());
  CHECK(r.subset_components->gamma1 - r.subset_components->gamma0 ==
        doctest::Approx(r.estimate).epsilon(1e-12));
  CHECK(r.variance ==
        doctest::Approx(r.subset_components->var0 +
                        r.subset_components->var1)
            .epsilon(1e-12));
}

TEST_CASE("controlled interaction matches the pooled oracle projection") {
  const auto ds = random_dataset(37, 250, 1);
  const auto r = atme::controlled_interaction(ds);
  // design: 1, T, S, X, T*S (no T*X)
  Eigen::MatrixXd design(ds.n(), 5);
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = ds.t[i];
    design(i, 2) = ds.s[i];
    design(i, 3) = ds.x(i, 0);
    design(i, 4) = ds.t[i] * ds.s[i];
  }
  const double expected = oracles::normal_equations(design, ds.y)[4];
  CHECK(r.estimate == doctest::Approx(expected).epsilon(1e-9));
  CHECK(r.diagnostics.at("biased_for_atme") == "true");
}

TEST_CASE("weighting on the 4-unit hand example is exactly 1") {
  atme::Dataset ds;
  ds.y.resize(4);
  ds.y << 5, 2, 3, 1;
  ds.t.resize(4);
  ds.t << 1, 0, 1, 0;
  ds.s.resize(4);
  ds.s << 1, 1, 0, 0;
  ds.x.resize(4, 0);
  ds.source_rows = {0, 1, 2, 3};
  // with p = pi = 1/2 every weight is +-1/(1/4); the sum telescopes:
  // (1/4)[5 - 2 - 3 + 1] * 4 = 1
  const auto r = atme::propensity_weighting(
      ds, atme::KnownP{0.5},
      atme::KnownPi{[](const Eigen::VectorXd&) { return 0.5; }});
  CHECK(r.estimate == 1.0);  // exact, not approximate
}

TEST_CASE("weighting with true propensities is consistent") {
  atme::DgpConfig cfg;
  cfg.delta = 2.0;
  cfg.xi = 1.5;
  cfg.n = 40000;
  cfg.seed = 404;
  const auto ds = atme::generate(cfg);
  const auto r = atme::propensity_weighting(
      ds, atme::KnownP{0.5}, atme::KnownPi{[&](const Eigen::VectorXd& row) {
        return atme::logistic(cfg.s_a + cfg.s_b * row[0]);
      }});
  CHECK(r.estimate == doctest::Approx(2.0).epsilon(0.08));
  CHECK(r.std_error > 0.0);
}

TEST_CASE("weighting estimates nuisances from data when unspecified") {
  const auto ds = random_dataset(41, 2000, 1, /*xi=*/0.0);
  const auto r = atme::propensity_weighting(ds);
  CHECK(std::abs(r.estimate - 2.0) < 0.5);
  CHECK(r.diagnostics.count("p") == 1);
  CHECK(r.diagnostics.count("trimmed_rows") == 1);
}

TEST_CASE("matching on exact duplicates recovers the cell difference") {
  // discrete covariate, exact matches available in every subset
  atme::Xoshiro256pp rng(51);
  const int n = 800;
  atme::Dataset ds;
  ds.y.resize(n);
  ds.t.resize(n);
  ds.s.resize(n);
  ds.x.resize(n, 1);
  ds.covariate_names = {"x"};
  ds.source_rows.resize(n);
  for (int i = 0; i < n; ++i) {
    ds.source_rows[i] = static_cast<std::size_t>(i);
    const double x = static_cast<double>(rng.discrete({0.25, 0.5, 0.75, 1.0}));
    const int t = rng.bernoulli(0.5) ? 1 : 0;
    const int s = rng.bernoulli(atme::logistic(-0.5 + 0.5 * x)) ? 1 : 0;
    ds.x(i, 0) = x;
    ds.t[i] = t;
    ds.s[i] = s;
    ds.y[i] = t + s + x + 2.0 * t * s + 0.5 * rng.normal();
  }
  const auto r = atme::parallel_matching(ds);
  CHECK(std::abs(r.estimate - 2.0) < 0.4);
  CHECK(r.diagnostics.at("estimand") == "atme-for-the-moderated");
  // exact matches mean zero post-match covariate imbalance
  CHECK(r.diagnostics.count("smd:x") == 1);
}

TEST_CASE("balance table reports zero SMD after exact matching") {
  atme::Xoshiro256pp rng(53);
  const int n = 400;
  atme::Dataset ds;
  ds.y.resize(n);
  ds.t.resize(n);
  ds.s.resize(n);
  ds.x.resize(n, 1);
  ds.covariate_names = {"x"};
  ds.source_rows.resize(n);
  for (int i = 0; i < n; ++i) {
    ds.source_rows[i] = static_cast<std::size_t>(i);
    ds.x(i, 0) = static_cast<double>(rng.discrete({0.5, 1.0}));
    ds.t[i] = rng.bernoulli(0.5) ? 1 : 0;
    ds.s[i] = rng.bernoulli(atme::logistic(ds.x(i, 0) - 0.5)) ? 1 : 0;
    ds.y[i] = rng.normal();
  }
  const auto [d0, d1] = atme::split_by_treatment(ds);
  auto match = [](const atme::Dataset& part) {
    Eigen::VectorXi group(part.n());
    for (Eigen::Index i = 0; i < part.n(); ++i) group[i] = part.s[i];
    return atme::mahalanobis_match(part.x, group);
  };
  const auto m0 = match(d0);
  const auto m1 = match(d1);
  const auto report = atme::balance_table(ds, &m0, &m1);
  REQUIRE(report.entries.size() == 1);
  const auto& e = report.entries[0];
  CHECK(e.computable);
  REQUIRE(e.smd_after_t0.has_value());
  REQUIRE(e.smd_after_t1.has_value());
  CHECK(std::abs(*e.smd_after_t0) < 1e-12);
  CHECK(std::abs(*e.smd_after_t1) < 1e-12);
  CHECK(std::abs(e.smd_before_t0) > 0.0);
}

TEST_CASE("estimators fail cleanly on an empty cell") {
  atme::Dataset ds = cell_fixture();
  // wipe out the (T=1, S=0) cell
  ds.s[4] = 1;
  ds.s[5] = 1;
  CHECK_THROWS_AS(atme::parallel_regression(ds), atme::ValidationError);
}

TEST_CASE("registry exposes all six estimators and rejects unknowns") {
  auto& reg = atme::EstimatorRegistry::instance();
  const auto names = reg.names();
  for (const char* expected :
       {"subset-difference", "controlled-interaction",
        "parallel-regression", "full-interaction", "parallel-matching",
        "propensity-weighting"}) {
    CAPTURE(expected);
    CHECK(std::find(names.begin(), names.end(), expected) != names.end());
  }
  CHECK_THROWS_AS(reg.find("nope"), atme::ValidationError);
  const auto ds = random_dataset(61, 200, 1);
  const auto viaRegistry =
      reg.find("parallel-regression")(ds, atme::EstimatorOptions{});
  const auto direct = atme::parallel_regression(ds);
  CHECK(viaRegistry.estimate == direct.estimate);
}

TEST_CASE("confidence level propagates to the interval") {
  const auto ds = random_dataset(71, 300, 1);
  atme::EstimatorOptions opts;
  opts.level = 0.9;
  const auto r = atme::parallel_regression(ds, opts);
  CHECK(r.level == 0.9);
  // z_{0.95} = 1.6448536269514722
  CHECK(r.ci_upper - r.estimate ==
        doctest::Approx(1.6448536269514722 * r.std_error).epsilon(1e-6));
}
