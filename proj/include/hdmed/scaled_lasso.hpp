#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace hdmed {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LassoOptions {
  double kkt_tol = 1e-7;
  int max_sweeps = 10000;
};

// Minimizes (1/(2n)) ||y - X b||^2 + lambda * sum_j w_j |b_j| by cyclic
// coordinate descent with active-set sweeps. X must have columns with
// (1/n) x_j^T x_j = 1; columns that are identically zero are left at 0.
// `weights` defaults to all ones; a zero weight leaves that coordinate
// unpenalized. `warm` seeds the iterate. Throws NumericError when the KKT
// conditions are not met within max_sweeps full sweeps.
VectorXd lasso_cd(const MatrixXd& x, const VectorXd& y, double lambda, const LassoOptions& opts = {},
                  const VectorXd* weights = nullptr, const VectorXd* warm = nullptr);

// Largest KKT violation of `beta` for the weighted lasso problem above.
double lasso_kkt_violation(const MatrixXd& x, const VectorXd& y, double lambda, const VectorXd& beta,
                           const VectorXd* weights = nullptr);

enum class PenaltyScheme { universal, quantile };

// Base penalty level lambda0 for the scaled lasso on an n x m design.
double penalty_level(int n, int m, PenaltyScheme scheme);

struct ScaledLassoOptions {
  LassoOptions lasso;
  double sigma_tol = 1e-6;   // relative to the standard deviation of y
  int max_outer = 100;
  bool standardize = true;
  // Per-column penalty multipliers (0 = unpenalized). Empty means all ones.
  VectorXd penalty_factor;
};

struct ScaledLassoFit {
  VectorXd coef;            // on the original column scale
  double sigma_hat = 0.0;
  double lambda0 = 0.0;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;  // y identically zero
  std::vector<int> support;
  // Objective value after each outer iteration, on the standardized scale.
  std::vector<double> objective_trace;
};

// Lower bound applied to sigma_hat: 1e-8 times the standard deviation of y
// (or 1e-8 if y has zero spread).
double sigma_floor(const VectorXd& y);

// Scaled lasso: jointly minimizes
//   ||y - X b||^2 / (2 n sigma) + sigma / 2 + lambda0 * sum_j w_j s_j |b_j|
// over (b, sigma), where s_j is the root mean square of column j when
// standardizing (1 otherwise). X and y must be centered.
ScaledLassoFit scaled_lasso(const MatrixXd& x, const VectorXd& y, double lambda0,
                            const ScaledLassoOptions& opts = {});

// Value of the scaled-lasso objective at (beta, sigma) with per-column
// penalty weights `w` (all ones when null).
double scaled_lasso_objective(const MatrixXd& x, const VectorXd& y, double lambda0, const VectorXd& beta,
                              double sigma, const VectorXd* w = nullptr);

}  // namespace hdmed
