#include "hdmed/scaled_lasso.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <string>

#include "hdmed/error.hpp"

namespace hdmed {

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

double sd_pop(const VectorXd& y) {
  const double mean = y.mean();
  return std::sqrt((y.array() - mean).square().mean());
}

}  // namespace

double lasso_kkt_violation(const MatrixXd& x, const VectorXd& y, double lambda, const VectorXd& beta,
                           const VectorXd* weights) {
  const double n = static_cast<double>(x.rows());
  const VectorXd grad = x.transpose() * (y - x * beta) / n;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double pen = lambda * (weights ? (*weights)(j) : 1.0);
    double v;
    if (beta(j) != 0.0) {
      v = std::abs(grad(j) - pen * sign(beta(j)));
    } else {
      v = std::max(0.0, std::abs(grad(j)) - pen);
    }
    worst = std::max(worst, v);
  }
  return worst;
}

VectorXd lasso_cd(const MatrixXd& x, const VectorXd& y, double lambda, const LassoOptions& opts,
                  const VectorXd* weights, const VectorXd* warm) {
  const Eigen::Index n = x.rows();
  const Eigen::Index m = x.cols();
  if (y.size() != n) throw DataError("lasso_cd: design has " + std::to_string(n) + " rows, response has " +
                                     std::to_string(y.size()));
  if (!(lambda >= 0.0)) throw DataError("lasso_cd: lambda must be nonnegative");
  if (weights && weights->size() != m) throw DataError("lasso_cd: penalty weight length mismatch");

  const double inv_n = 1.0 / static_cast<double>(n);
  VectorXd col_sq = x.colwise().squaredNorm().transpose() * inv_n;
  VectorXd pen(m);
  for (Eigen::Index j = 0; j < m; ++j) pen(j) = lambda * (weights ? (*weights)(j) : 1.0);

  VectorXd beta = warm ? *warm : VectorXd::Zero(m);
  if (beta.size() != m) beta = VectorXd::Zero(m);
  for (Eigen::Index j = 0; j < m; ++j)
    if (col_sq(j) == 0.0) beta(j) = 0.0;

  VectorXd resid(n);
  std::vector<Eigen::Index> active;
  active.reserve(static_cast<std::size_t>(m));

  // Coordinate update; returns the weighted squared step.
  auto update = [&](Eigen::Index j) -> double {
    if (col_sq(j) == 0.0) return 0.0;
    const double old = beta(j);
    const double z = x.col(j).dot(resid) * inv_n + col_sq(j) * old;
    const double fresh = soft_threshold(z, pen(j)) / col_sq(j);
    if (fresh == old) return 0.0;
    resid.noalias() -= (fresh - old) * x.col(j);
    beta(j) = fresh;
    const double d = fresh - old;
    return col_sq(j) * d * d;
  };

  const double step_tol = std::max(1e-28, 1e-6 * opts.kkt_tol * opts.kkt_tol);
  int sweeps = 0;
  while (sweeps < opts.max_sweeps) {
    resid = y - x * beta;
    // Full sweep refreshes the active set.
    double worst = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) worst = std::max(worst, update(j));
    ++sweeps;
    active.clear();
    for (Eigen::Index j = 0; j < m; ++j)
      if (beta(j) != 0.0) active.push_back(j);

    // Cycle on the active set until it settles.
    while (worst > step_tol && sweeps < opts.max_sweeps) {
      worst = 0.0;
      for (auto j : active) worst = std::max(worst, update(j));
      ++sweeps;
    }
    if (lasso_kkt_violation(x, y, lambda, beta, weights) <= opts.kkt_tol) return beta;
  }
  throw NumericError("lasso coordinate descent did not reach KKT tolerance after " +
                     std::to_string(opts.max_sweeps) + " sweeps");
}

double penalty_level(int n, int m, PenaltyScheme scheme) {
  if (n < 2) throw DataError("penalty_level: need n >= 2");
  if (m < 1) throw DataError("penalty_level: need m >= 1");
  if (scheme == PenaltyScheme::universal) return std::sqrt(2.0 * std::log(static_cast<double>(m)) / n);

  // Quantile level: L = z_{1 - k/m} with k = L^4 + 2 L^2, then lambda0 = sqrt(2/n) L.
  const boost::math::normal_distribution<double> std_normal;
  const double md = static_cast<double>(m);
  auto excess = [&](double l) {
    const double k = l * l * l * l + 2.0 * l * l;
    const double t = std::min(k / md, 0.99);
    return l - boost::math::quantile(boost::math::complement(std_normal, t));
  };
  double lo = 1e-4;
  double hi = 10.0;
  while (excess(lo) > 0.0) lo *= 0.5;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) > 0.0 ? hi : lo) = mid;
  }
  return std::sqrt(2.0 / n) * 0.5 * (lo + hi);
}

double sigma_floor(const VectorXd& y) {
  const double sd = y.size() > 0 ? sd_pop(y) : 0.0;
  return 1e-8 * (sd > 0.0 ? sd : 1.0);
}

double scaled_lasso_objective(const MatrixXd& x, const VectorXd& y, double lambda0, const VectorXd& beta,
                              double sigma, const VectorXd* w) {
  const double n = static_cast<double>(x.rows());
  const double rss = (y - x * beta).squaredNorm();
  const double l1 = w ? (w->cwiseProduct(beta)).lpNorm<1>() : beta.lpNorm<1>();
  return rss / (2.0 * n * sigma) + sigma / 2.0 + lambda0 * l1;
}

ScaledLassoFit scaled_lasso(const MatrixXd& x, const VectorXd& y, double lambda0, const ScaledLassoOptions& opts) {
  const Eigen::Index n = x.rows();
  const Eigen::Index m = x.cols();
  if (y.size() != n) throw DataError("scaled_lasso: design/response row mismatch");
  if (!(lambda0 >= 0.0)) throw DataError("scaled_lasso: lambda0 must be nonnegative");
  if (opts.penalty_factor.size() != 0 && opts.penalty_factor.size() != m)
    throw DataError("scaled_lasso: penalty factor length mismatch");

  ScaledLassoFit fit;
  fit.lambda0 = lambda0;
  fit.coef = VectorXd::Zero(m);
  const double floor = sigma_floor(y);

  if (y.squaredNorm() == 0.0) {
    fit.sigma_hat = floor;
    fit.converged = true;
    fit.degenerate = true;
    return fit;
  }

  VectorXd scale = VectorXd::Ones(m);
  MatrixXd xs;
  const MatrixXd* design = &x;
  if (opts.standardize) {
    scale = (x.colwise().squaredNorm().transpose() / static_cast<double>(n)).cwiseSqrt();
    xs = x;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (scale(j) > 0.0) {
        xs.col(j) /= scale(j);
      } else {
        scale(j) = 1.0;
        xs.col(j).setZero();
      }
    }
    design = &xs;
  }
  const VectorXd weights = opts.penalty_factor.size() == m ? opts.penalty_factor : VectorXd::Ones(m);

  const double sd_y = sd_pop(y);
  const double tol = opts.sigma_tol * (sd_y > 0.0 ? sd_y : 1.0);
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  VectorXd beta = VectorXd::Zero(m);
  double sigma = std::max(y.norm() / sqrt_n, floor);
  for (int outer = 1; outer <= opts.max_outer; ++outer) {
    beta = lasso_cd(*design, y, lambda0 * sigma, opts.lasso, &weights, &beta);
    const double fresh = std::max((y - *design * beta).norm() / sqrt_n, floor);
    fit.objective_trace.push_back(scaled_lasso_objective(*design, y, lambda0, beta, fresh, &weights));
    fit.iterations = outer;
    const bool done = std::abs(fresh - sigma) <= tol;
    sigma = fresh;
    if (done) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged)
    throw NumericError("scaled lasso did not converge in " + std::to_string(opts.max_outer) +
                       " outer iterations");

  fit.sigma_hat = sigma;
  fit.coef = beta.cwiseQuotient(scale);
  for (Eigen::Index j = 0; j < m; ++j)
    if (fit.coef(j) != 0.0) fit.support.push_back(static_cast<int>(j));
  return fit;
}

}  // namespace hdmed
