#pragma once

#include <Eigen/Dense>
#include <optional>

namespace hdmed {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Observed data for the linear mediation model
//   Y = G a0 + S a1 + e1,   G = S gamma^T + E.
// Rows are subjects. Z holds optional low-dimensional covariates.
struct Dataset {
  VectorXd y;                  // n outcome values
  MatrixXd g;                  // n x p mediators
  MatrixXd s;                  // n x q exposures
  std::optional<MatrixXd> z;   // n x r covariates
  bool centered = false;
  // Leading exposure columns the caller wants reported. After partial_out the
  // S block carries the covariates too, but only these columns are reported.
  int n_reported = -1;

  int n() const { return static_cast<int>(y.size()); }
  int p() const { return static_cast<int>(g.cols()); }
  int q() const { return static_cast<int>(s.cols()); }
  int reported_q() const { return n_reported < 0 ? q() : n_reported; }
};

// (1/n) cross-product matrices of a centered dataset. X = (G, S).
struct SampleMoments {
  MatrixXd sigma_ss;   // q x q
  MatrixXd sigma_sg;   // q x p
  MatrixXd sigma_gg;   // p x p
  MatrixXd sigma_xx;   // (p+q) x (p+q), blocks [[GG, GS], [SG, SS]]
  VectorXd sigma_xy;   // p+q
  VectorXd sigma_gy;   // p
  VectorXd sigma_sy;   // q
  MatrixXd d_hat;      // 2q x (p+q), blockdiag(sigma_sg, sigma_ss)
  int n = 0;

  int p() const { return static_cast<int>(sigma_gg.rows()); }
  int q() const { return static_cast<int>(sigma_ss.rows()); }
};

// Reciprocal condition number below which sigma_ss counts as singular.
inline constexpr double kMinRcond = 1e-10;

// Checks shapes and finiteness; throws DataError.
void validate(const Dataset& data);

// Column-centered copy of every block. Idempotent up to rounding.
Dataset prepare(const Dataset& raw);

// Sample moments of centered data. Throws NumericError when sigma_ss has
// reciprocal condition number below kMinRcond (collinear exposures).
SampleMoments moments(const Dataset& data);

// Folds covariates into the exposure block, S~ = (S, Z), keeping the
// original exposure count in n_reported. Pass-through when Z is absent.
Dataset partial_out(const Dataset& data);

// Inverse of a symmetric positive definite matrix, throwing NumericError
// (mentioning `what`) if its reciprocal condition number is below min_rcond.
MatrixXd invert_spd(const MatrixXd& a, const char* what, double min_rcond = kMinRcond);

// Reciprocal condition number (smallest / largest eigenvalue) of a symmetric matrix.
double rcond_sym(const MatrixXd& a);

// Mean of each column.
VectorXd column_means(const MatrixXd& m);

}  // namespace hdmed
