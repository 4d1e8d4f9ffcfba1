#include "hdmed/core_stats.hpp"

#include <string>

#include "hdmed/error.hpp"

namespace hdmed {

namespace {

bool all_finite(const MatrixXd& m) { return m.allFinite(); }

void center_columns(MatrixXd& m) {
  if (m.rows() == 0) return;
  m.rowwise() -= m.colwise().mean();
}

}  // namespace

VectorXd column_means(const MatrixXd& m) { return m.colwise().mean().transpose(); }

void validate(const Dataset& data) {
  const auto n = data.y.size();
  if (n < 2) throw DataError("need at least 2 observations, got " + std::to_string(n));
  if (data.g.rows() != n)
    throw DataError("mediator matrix has " + std::to_string(data.g.rows()) + " rows, outcome has " +
                    std::to_string(n));
  if (data.s.rows() != n)
    throw DataError("exposure matrix has " + std::to_string(data.s.rows()) + " rows, outcome has " +
                    std::to_string(n));
  if (data.s.cols() < 1) throw DataError("need at least one exposure column");
  if (data.z && data.z->rows() != n)
    throw DataError("covariate matrix has " + std::to_string(data.z->rows()) + " rows, outcome has " +
                    std::to_string(n));
  if (!data.y.allFinite()) throw DataError("outcome contains non-finite values");
  if (!all_finite(data.g)) throw DataError("mediators contain non-finite values");
  if (!all_finite(data.s)) throw DataError("exposures contain non-finite values");
  if (data.z && !all_finite(*data.z)) throw DataError("covariates contain non-finite values");
}

Dataset prepare(const Dataset& raw) {
  validate(raw);
  Dataset out = raw;
  out.y.array() -= out.y.mean();
  center_columns(out.g);
  center_columns(out.s);
  if (out.z) center_columns(*out.z);
  out.centered = true;
  return out;
}

double rcond_sym(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double hi = ev.cwiseAbs().maxCoeff();
  if (hi == 0.0) return 0.0;
  return ev.minCoeff() / hi;
}

MatrixXd invert_spd(const MatrixXd& a, const char* what, double min_rcond) {
  const double rc = rcond_sym(a);
  if (!(rc >= min_rcond))
    throw NumericError(std::string(what) + " is singular (reciprocal condition number " +
                       std::to_string(rc) + ")");
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw NumericError(std::string(what) + " is not positive definite");
  return llt.solve(MatrixXd::Identity(a.rows(), a.cols()));
}

SampleMoments moments(const Dataset& data) {
  validate(data);
  if (!data.centered) throw DataError("moments() requires centered data; call prepare() first");

  const int n = data.n();
  const int p = data.p();
  const int q = data.q();
  const double inv_n = 1.0 / n;

  SampleMoments m;
  m.n = n;
  m.sigma_ss = inv_n * (data.s.transpose() * data.s);
  m.sigma_sg = inv_n * (data.s.transpose() * data.g);
  m.sigma_gg = MatrixXd::Zero(p, p);
  m.sigma_gg.selfadjointView<Eigen::Lower>().rankUpdate(data.g.transpose(), inv_n);
  m.sigma_gg.triangularView<Eigen::StrictlyUpper>() = m.sigma_gg.transpose();
  m.sigma_gy = inv_n * (data.g.transpose() * data.y);
  m.sigma_sy = inv_n * (data.s.transpose() * data.y);

  m.sigma_xx.resize(p + q, p + q);
  m.sigma_xx.topLeftCorner(p, p) = m.sigma_gg;
  m.sigma_xx.topRightCorner(p, q) = m.sigma_sg.transpose();
  m.sigma_xx.bottomLeftCorner(q, p) = m.sigma_sg;
  m.sigma_xx.bottomRightCorner(q, q) = m.sigma_ss;

  m.sigma_xy.resize(p + q);
  m.sigma_xy << m.sigma_gy, m.sigma_sy;

  m.d_hat = MatrixXd::Zero(2 * q, p + q);
  m.d_hat.topLeftCorner(q, p) = m.sigma_sg;
  m.d_hat.bottomRightCorner(q, q) = m.sigma_ss;

  const double rc = rcond_sym(m.sigma_ss);
  if (!(rc >= kMinRcond))
    throw NumericError("exposure covariance is singular (reciprocal condition number " +
                       std::to_string(rc) + "); exposures are collinear");
  return m;
}

Dataset partial_out(const Dataset& data) {
  if (!data.z) return data;
  validate(data);
  Dataset out;
  out.y = data.y;
  out.g = data.g;
  const int q = data.q();
  const int r = static_cast<int>(data.z->cols());
  out.s.resize(data.n(), q + r);
  out.s << data.s, *data.z;
  out.centered = data.centered;
  out.n_reported = data.reported_q();

  const MatrixXd ss = out.s.transpose() * out.s / data.n();
  const double rc = rcond_sym(ss);
  if (!(rc >= kMinRcond))
    throw NumericError("covariates are collinear with the exposures (reciprocal condition number " +
                       std::to_string(rc) + ")");
  return out;
}

}  // namespace hdmed
