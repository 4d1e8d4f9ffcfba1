#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "hdmed/core_stats.hpp"
#include "hdmed/l1_solver.hpp"
#include "hdmed/scaled_lasso.hpp"

namespace hdmed {

enum class MediationMode { incomplete, complete };

const char* to_string(MediationMode mode);

// Structured, machine-readable caveat attached to a result.
struct Warning {
  std::string code;
  std::string message;
};

struct NoiseEstimates {
  double sigma1_sq = 0.0;       // outcome residual variance given mediators (and exposures)
  double sigma2_sq = 0.0;       // variance of E^T a0, truncated at zero
  double sigma_total_sq = 0.0;  // residual variance of Y regressed on S alone
  bool truncated = false;       // sigma1_sq exceeded sigma_total_sq
};

struct InferenceConfig {
  std::optional<double> tau;      // default sqrt(log p / n) / 3
  PenaltyScheme lambda_scheme = PenaltyScheme::quantile;
  std::optional<double> lambda0;  // overrides lambda_scheme when set
  double level = 0.95;            // confidence level of the intervals
  // Penalize the exposure (direct effect) and covariate coefficients in the
  // pilot regression. Leaving them unpenalized has no inference guarantee.
  bool penalize_direct = true;
  ScaledLassoOptions lasso;
  RowSolverOptions rows;
  double dual_form_tol = 1e-8;    // relative agreement required of the two algebraic forms
  // On an infeasible row, retry at 1.05 times the smallest achievable residual
  // instead of failing. Adds a "tau_raised" warning.
  bool raise_tau_if_infeasible = false;
};

struct WaldResult {
  VectorXd z;
  VectorXd p;
  VectorXd lower;
  VectorXd upper;
  std::vector<bool> degenerate;  // zero variance component
};

// Per-component Wald z, two-sided normal p-values and intervals at the given
// confidence level. Throws NumericError on a negative variance.
WaldResult wald(const VectorXd& estimate, const MatrixXd& cov, double level);

struct MediationEstimate {
  MediationMode mode = MediationMode::complete;
  VectorXd b_hat;                // indirect effect, reported exposures only
  std::optional<VectorXd> a_hat; // direct effect (incomplete mode only)
  // Covariance of (b_hat, a_hat) or b_hat, already divided by n.
  MatrixXd cov;
  VectorXd se;
  WaldResult inference;          // stacked over (b_hat, a_hat)
  VectorXd alpha_tilde;          // pilot coefficients (mediators first)
  NoiseEstimates noise;
  ScaledLassoFit pilot;
  DebiasingMatrix omega;
  double tau = 0.0;
  double lambda0 = 0.0;
  double level = 0.95;
  double dual_form_gap = 0.0;    // relative disagreement of the two forms
  int n = 0;
  int p = 0;
  int q = 0;                     // reported exposures
  int q_augmented = 0;           // exposures plus covariates used in the fit
  std::vector<Warning> warnings;
};

// sigma1^2 from the pilot fit; sigma^2 = RSS/n of Y on S; sigma2^2 = max(sigma^2 - sigma1^2, 0).
NoiseEstimates estimate_noise(const Dataset& data, const ScaledLassoFit& fit);

// Debiased estimator of the indirect and direct effects with the exposure's
// direct path left in the model. Requires centered data.
MediationEstimate fit_incomplete(const Dataset& data, const InferenceConfig& cfg = {});

// Debiased estimator of the indirect effect assuming no direct path.
MediationEstimate fit_complete(const Dataset& data, const InferenceConfig& cfg = {});

// Direct effect as the OLS total effect minus b_hat.
VectorXd direct_effect_alt(const Dataset& data, const MediationEstimate& inc);

// OLS coefficients of y on the columns of s (no intercept; data centered).
VectorXd ols_coef(const MatrixXd& s, const VectorXd& y);

}  // namespace hdmed
