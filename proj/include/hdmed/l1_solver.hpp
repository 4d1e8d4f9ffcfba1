#pragma once

#include <Eigen/Dense>

#include "hdmed/core_stats.hpp"

namespace hdmed {

enum class RowAlgorithm {
  interior_point,  // structured primal-dual path following (default)
  admm,            // linearized ADMM, falls back to interior point on stall
};

struct RowSolverOptions {
  RowAlgorithm algorithm = RowAlgorithm::interior_point;
  double feas_tol = 1e-7;   // allowed excess of ||sigma w - d||_inf over tau
  double ipm_tol = 1e-9;    // relative residual / gap tolerance of the interior point
  int ipm_max_iter = 200;
  double admm_tol = 1e-7;   // primal and dual residual tolerance
  int admm_max_iter = 20000;
  int threads = 1;          // concurrent row solves in estimate_omega_*
};

// Outcome of a single row solve, with diagnostics.
struct RowSolution {
  VectorXd omega;
  double residual = 0.0;  // ||sigma omega - d||_inf
  double l1 = 0.0;
  int iterations = 0;
  bool used_fallback = false;
};

// argmin ||w||_1 subject to ||sigma w - d||_inf <= tau, sigma symmetric PSD.
// Throws InfeasibleError (with the minimal achievable residual) when no w
// satisfies the constraint, NumericError on non-convergence.
RowSolution solve_row_detailed(const MatrixXd& sigma, const VectorXd& d, double tau,
                               const RowSolverOptions& opts = {});

inline VectorXd solve_row(const MatrixXd& sigma, const VectorXd& d, double tau,
                          const RowSolverOptions& opts = {}) {
  return solve_row_detailed(sigma, d, tau, opts).omega;
}

// min_w ||sigma w - d||_inf: the smallest tau for which solve_row is feasible.
double min_feasible_tau(const MatrixXd& sigma, const VectorXd& d, const RowSolverOptions& opts = {});

struct DebiasingMatrix {
  MatrixXd omega;          // k x m
  double tau = 0.0;
  VectorXd row_residuals;  // achieved ||omega_i^T sigma - d_i||_inf
  VectorXd row_l1;
  int total_iterations = 0;
};

// Default tuning level sqrt(log p / n) / 3.
double default_tau(int n, int p);

// Rows solve against sigma_gg with targets the rows of sigma_sg (q x p).
DebiasingMatrix estimate_omega_c(const SampleMoments& m, double tau, const RowSolverOptions& opts = {});

// Rows solve against sigma_xx with targets the rows of d_hat (2q x (p+q)).
DebiasingMatrix estimate_omega_i(const SampleMoments& m, double tau, const RowSolverOptions& opts = {});

// Solves each row of `targets` against `sigma`, possibly concurrently.
// Failures are rethrown with the row index in the message.
DebiasingMatrix solve_rows(const MatrixXd& sigma, const MatrixXd& targets, double tau,
                           const RowSolverOptions& opts = {});

}  // namespace hdmed
