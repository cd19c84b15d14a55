#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "atme/estimators.hpp"
#include "atme/least_squares.hpp"
#include "atme/logistic.hpp"
#include "atme/matching.hpp"
#include "atme/mixture.hpp"
#include "atme/rng.hpp"
#include "atme/simulation.hpp"

namespace {

atme::Dataset sample_data(std::size_t n, std::uint64_t seed = 1) {
  atme::DgpConfig cfg;
  cfg.n = n;
  cfg.xi = 1.5;
  cfg.seed = seed;
  return atme::generate(cfg);
}

void BM_least_squares(benchmark::State& state) {
  const auto ds = sample_data(static_cast<std::size_t>(state.range(0)));
  Eigen::MatrixXd design(ds.n(), 3);
  design.col(0).setOnes();
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    design(i, 1) = ds.s[i];
    design(i, 2) = ds.x(i, 0);
  }
  for (auto _ : state) {
    auto fit = atme::least_squares_fit(
        design, ds.y, atme::VarianceMode::HeteroskedasticityRobust,
        {"const", "s", "x"});
    benchmark::DoNotOptimize(fit.coefficients);
  }
}
BENCHMARK(BM_least_squares)->Arg(1000)->Arg(10000);

void BM_logistic(benchmark::State& state) {
  const auto ds = sample_data(static_cast<std::size_t>(state.range(0)));
  Eigen::MatrixXd design(ds.n(), 2);
  design.col(0).setOnes();
  design.col(1) = ds.x.col(0);
  Eigen::VectorXd s(ds.n());
  for (Eigen::Index i = 0; i < ds.n(); ++i) s[i] = ds.s[i];
  for (auto _ : state) {
    auto fit = atme::logistic_fit(design, s);
    benchmark::DoNotOptimize(fit.coefficients);
  }
}
BENCHMARK(BM_logistic)->Arg(1000)->Arg(10000);

void BM_matching(benchmark::State& state) {
  const auto ds = sample_data(static_cast<std::size_t>(state.range(0)));
  Eigen::VectorXi group(ds.n());
  for (Eigen::Index i = 0; i < ds.n(); ++i) group[i] = ds.s[i];
  for (auto _ : state) {
    auto ms = atme::mahalanobis_match(ds.x, group);
    benchmark::DoNotOptimize(ms.pairs);
  }
}
BENCHMARK(BM_matching)->Arg(500)->Arg(2000);

void BM_parallel_regression(benchmark::State& state) {
  const auto ds = sample_data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto r = atme::parallel_regression(ds);
    benchmark::DoNotOptimize(r.estimate);
  }
}
BENCHMARK(BM_parallel_regression)->Arg(1000)->Arg(10000);

void BM_mixture_mle(benchmark::State& state) {
  const auto [t0, t1] = atme::split_by_treatment(
      sample_data(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) {
    auto r = atme::mixture_mle(t1, 1.0, 0.5);
    benchmark::DoNotOptimize(r.gamma);
  }
}
BENCHMARK(BM_mixture_mle)->Arg(500)->Arg(2000);

void BM_monte_carlo(benchmark::State& state) {
  atme::DgpConfig cfg;
  cfg.n = 500;
  cfg.xi = 1.5;
  for (auto _ : state) {
    auto report = atme::monte_carlo(
        cfg, static_cast<std::size_t>(state.range(0)),
        {"parallel-regression", "controlled-interaction"});
    benchmark::DoNotOptimize(report.estimators);
  }
}
BENCHMARK(BM_monte_carlo)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
