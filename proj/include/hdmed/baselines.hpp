#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "hdmed/core_stats.hpp"
#include "hdmed/mediation.hpp"
#include "hdmed/scaled_lasso.hpp"

namespace hdmed {

enum class BaselineMethod { ols, naive_bootstrap };

const char* to_string(BaselineMethod m);

struct BaselineEstimate {
  BaselineMethod method = BaselineMethod::ols;
  VectorXd point;
  VectorXd lower;
  VectorXd upper;
  std::optional<MatrixXd> variance;  // OLS only, already divided by n
  VectorXd p_value;
  // Bootstrap p-values come from inverting percentile intervals and carry
  // no guarantee; OLS p-values are Wald.
  bool p_value_rigorous = true;
  int n_boot = 0;
  int n_skipped = 0;
  double lambda = 0.0;
  MatrixXd replicates;  // n_boot x q, in resample order (failed ones dropped)
  std::vector<Warning> warnings;
};

// OLS of Y on the exposures (and covariates, reporting the exposures only).
BaselineEstimate ols_total_effect(const Dataset& data, double level = 0.95);

enum class NaiveLambdaRule {
  universal_scaled,  // sqrt(2 log m / n) times sigma from a preliminary scaled lasso
};

// Penalty the naive estimator uses on centered data.
double naive_lambda(const Dataset& data, MediationMode mode, NaiveLambdaRule rule = NaiveLambdaRule::universal_scaled);

// Sigma_SS^-1 Sigma_SG a0 with a0 from a plain lasso at `lambda` (on the
// standardized design) of Y on G (complete) or (G, S) (incomplete).
VectorXd naive_indirect(const Dataset& data, double lambda, MediationMode mode = MediationMode::complete,
                        const LassoOptions& opts = {});

struct BootstrapOptions {
  NaiveLambdaRule lambda_rule = NaiveLambdaRule::universal_scaled;
  MediationMode mode = MediationMode::complete;
  int n_boot = 500;
  double level = 0.95;
  std::uint64_t seed = 1;
  int threads = 1;
  double max_skip_fraction = 0.10;
};

// Pairs (row) bootstrap of naive_indirect with percentile intervals. The
// penalty is chosen once on the full data and reused for every resample.
BaselineEstimate naive_bootstrap(const Dataset& data, const BootstrapOptions& opts);

// Percentile endpoints as order statistics: the ceil(B a/2)-th and
// ceil(B (1 - a/2))-th smallest replicates, a = 1 - level.
std::pair<double, double> percentile_interval(std::vector<double> values, double level);

}  // namespace hdmed
