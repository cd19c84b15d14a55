#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "atme/dataset.hpp"
#include "atme/least_squares.hpp"
#include "atme/matching.hpp"

namespace atme {

struct EstimatorOptions {
  VarianceMode variance = VarianceMode::HeteroskedasticityRobust;
  double level = 0.95;
  /// Propensity trimming bounds for the weighting estimator.
  double trim_lo = 0.01;
  double trim_hi = 0.99;
};

/// Difference of the four (T,S) cell means. A treatment-effect
/// heterogeneity descriptor, not an unbiased ATME estimator.
EstimateResult subset_difference(const Dataset& ds,
                                 const EstimatorOptions& opts = {});

/// Coefficient on T*S from the single regression Y ~ 1+T+S+X+T*S with no
/// T*X terms. Flagged biased_for_atme in diagnostics.
EstimateResult controlled_interaction(const Dataset& ds,
                                      const EstimatorOptions& opts = {});

/// Parallel within-treatment regressions Y ~ 1+S+X; estimate is
/// gamma1 - gamma0, variance is the sum of the two variances.
EstimateResult parallel_regression(const Dataset& ds,
                                   const EstimatorOptions& opts = {});

/// Coefficient on T*S from Y ~ 1+T+S+X+T*S+T*X. Algebraically equal to
/// parallel_regression.
EstimateResult full_interaction(const Dataset& ds,
                                const EstimatorOptions& opts = {});

/// Parallel within-treatment Mahalanobis matching of S=1 units to S=0
/// units with replacement; the difference of the two within-subset mean
/// matched contrasts. Interpreted as the ATME for the moderated.
EstimateResult parallel_matching(const Dataset& ds,
                                 const EstimatorOptions& opts = {});

/// Treatment probability: design-known value or the sample mean of T.
struct KnownP {
  double value;
};
struct PFromData {};
using PSpec = std::variant<PFromData, KnownP>;

/// Moderator propensity: a known function of the covariate row, or a
/// logistic fit of S on X.
struct KnownPi {
  std::function<double(const Eigen::VectorXd&)> fn;
};
struct LogisticOnX {};
using PiSpec = std::variant<LogisticOnX, KnownPi>;

/// Inverse-probability weighting estimator
///   (1/N) sum Y (T-p)(S-pi(X)) / [p(1-p) pi(X)(1-pi(X))]
/// with pi trimmed to [trim_lo, trim_hi]. Variance is the empirical
/// variance of the summand over N (plug-in pi uncertainty ignored).
EstimateResult propensity_weighting(const Dataset& ds,
                                    const PSpec& p_spec = PFromData{},
                                    const PiSpec& pi_spec = LogisticOnX{},
                                    const EstimatorOptions& opts = {});

struct BalanceEntry {
  std::string covariate;
  double smd_before_t0 = 0.0;
  double smd_before_t1 = 0.0;
  std::optional<double> smd_after_t0;
  std::optional<double> smd_after_t1;
  bool computable = true;  // false when variance is zero and means differ
};

struct BalanceReport {
  std::vector<BalanceEntry> entries;
  std::size_t n_t0 = 0, n_t1 = 0;
  double effective_n_t0 = 0.0, effective_n_t1 = 0.0;
};

/// Standardized mean differences between S groups within each treatment
/// subset, before and (when match sets are supplied) after matching with
/// multiplicity weights.
BalanceReport balance_table(const Dataset& ds,
                            const MatchSet* matches_t0 = nullptr,
                            const MatchSet* matches_t1 = nullptr);

/// Uniform estimator signature so alternative within-subset strategies
/// can be registered without touching callers.
using EstimatorFn =
    std::function<EstimateResult(const Dataset&, const EstimatorOptions&)>;

class EstimatorRegistry {
 public:
  static EstimatorRegistry& instance();
  void register_estimator(const std::string& name, EstimatorFn fn);
  EstimatorFn find(const std::string& name) const;  // throws ValidationError
  std::vector<std::string> names() const;

 private:
  EstimatorRegistry();
  std::map<std::string, EstimatorFn> fns_;
};

}  // namespace atme
