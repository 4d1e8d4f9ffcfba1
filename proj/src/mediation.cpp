#include "hdmed/mediation.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <string>

#include "hdmed/error.hpp"

namespace hdmed {

namespace {

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// Largest |a - b| relative to the magnitude of the terms that produced them.
double relative_gap(const VectorXd& a, const VectorXd& b, std::initializer_list<double> term_scales) {
  double scale = std::max(inf_norm(a), inf_norm(b));
  for (double s : term_scales) scale = std::max(scale, s);
  const double diff = inf_norm(a - b);
  if (diff == 0.0) return 0.0;
  return diff / std::max(scale, std::numeric_limits<double>::min());
}

double row_sum_norm(const MatrixXd& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().rowwise().sum().maxCoeff();
}

// Size of the inputs entering both forms; keeps the gap meaningful when every
// term is itself near zero.
double input_scale(const MatrixXd& k, const MatrixXd& omega, const VectorXd& sxy, const MatrixXd& sxx,
                   const MatrixXd& dmat, const VectorXd& alpha) {
  const double a1 = alpha.lpNorm<1>();
  return row_sum_norm(k) * (row_sum_norm(omega) * (inf_norm(sxy) + row_sum_norm(sxx) * a1) +
                            row_sum_norm(dmat) * a1);
}

void require_centered(const Dataset& data) {
  validate(data);
  if (!data.centered) throw DataError("data must be centered; call prepare() first");
  if (data.p() < 1) throw DataError("need at least one mediator");
}

VectorXd pilot_weights(int p, int q, bool penalize_direct) {
  VectorXd w = VectorXd::Ones(p + q);
  if (!penalize_direct) w.tail(q).setZero();
  return w;
}

double pick_lambda0(const InferenceConfig& cfg, int n, int m) {
  if (cfg.lambda0) {
    if (!(*cfg.lambda0 >= 0.0)) throw DataError("lambda0 must be nonnegative");
    return *cfg.lambda0;
  }
  return penalty_level(n, m, cfg.lambda_scheme);
}

double pick_tau(const InferenceConfig& cfg, int n, int p) {
  if (cfg.tau) {
    if (!(*cfg.tau >= 0.0)) throw DataError("tau must be nonnegative");
    return *cfg.tau;
  }
  return default_tau(n, p);
}

template <class Solve>
DebiasingMatrix solve_rows_with_retry(const InferenceConfig& cfg, MediationEstimate& est, Solve solve) {
  const double requested = est.tau;
  for (int attempt = 0;; ++attempt) {
    try {
      DebiasingMatrix out = solve(est.tau);
      if (est.tau != requested)
        est.warnings.push_back({"tau_raised", "tau raised from " + std::to_string(requested) + " to " +
                                                  std::to_string(est.tau) + " to make every row feasible"});
      return out;
    } catch (const InfeasibleError& e) {
      if (!cfg.raise_tau_if_infeasible || attempt >= 16) throw;
      est.tau = std::max(est.tau * 1.05, e.min_residual() * 1.05);
    }
  }
}

// Indices of the reported components inside a stacked vector of `blocks`
// blocks of width q_aug each.
std::vector<Eigen::Index> reported_indices(int q, int q_aug, int blocks) {
  std::vector<Eigen::Index> idx;
  for (int b = 0; b < blocks; ++b)
    for (int j = 0; j < q; ++j) idx.push_back(static_cast<Eigen::Index>(b) * q_aug + j);
  return idx;
}

void add_common_warnings(MediationEstimate& est, const SampleMoments& m, const VectorXd& alpha0_tilde) {
  if (est.noise.truncated)
    est.warnings.push_back({"sigma2_truncated",
                            "pilot residual variance exceeded the total residual variance; sigma2^2 set to 0"});
  const double sg = m.sigma_sg.topRows(est.q).cwiseAbs().maxCoeff();
  if (alpha0_tilde.cwiseAbs().maxCoeff() == 0.0 && sg <= est.tau)
    est.warnings.push_back({"conservative_null",
                            "pilot mediator coefficients are zero and exposure-mediator covariance is negligible; "
                            "the Wald test may be conservative"});
}

void finish_inference(MediationEstimate& est, const VectorXd& full_est, const MatrixXd& full_cov, int blocks) {
  const auto idx = reported_indices(est.q, est.q_augmented, blocks);
  const auto k = static_cast<Eigen::Index>(idx.size());
  VectorXd stacked(k);
  est.cov.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    stacked(i) = full_est(idx[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < k; ++j)
      est.cov(i, j) = full_cov(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  est.cov = 0.5 * (est.cov + est.cov.transpose());
  est.b_hat = stacked.head(est.q);
  if (blocks == 2) est.a_hat = stacked.tail(est.q);
  est.se = est.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  est.inference = wald(stacked, est.cov, est.level);
}

}  // namespace

const char* to_string(MediationMode mode) {
  return mode == MediationMode::incomplete ? "incomplete" : "complete";
}

VectorXd ols_coef(const MatrixXd& s, const VectorXd& y) {
  const double n = static_cast<double>(s.rows());
  const MatrixXd ss = s.transpose() * s / n;
  return invert_spd(ss, "exposure covariance") * (s.transpose() * y / n);
}

WaldResult wald(const VectorXd& estimate, const MatrixXd& cov, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DataError("confidence level must lie in (0, 1)");
  if (cov.rows() != estimate.size() || cov.cols() != estimate.size())
    throw DataError("wald: covariance shape does not match estimate");
  const boost::math::normal_distribution<double> std_normal;
  const double crit = boost::math::quantile(std_normal, 1.0 - (1.0 - level) / 2.0);
  const Eigen::Index k = estimate.size();
  WaldResult out;
  out.z.resize(k);
  out.p.resize(k);
  out.lower.resize(k);
  out.upper.resize(k);
  out.degenerate.assign(static_cast<std::size_t>(k), false);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double var = cov(j, j);
    if (var < 0.0 || !std::isfinite(var))
      throw NumericError("wald: negative or non-finite variance for component " + std::to_string(j));
    const double est = estimate(j);
    const double se = std::sqrt(var);
    out.lower(j) = est - crit * se;
    out.upper(j) = est + crit * se;
    if (se == 0.0) {
      out.degenerate[static_cast<std::size_t>(j)] = true;
      out.z(j) = est == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), est);
      out.p(j) = est == 0.0 ? 1.0 : 0.0;
      continue;
    }
    out.z(j) = est / se;
    out.p(j) = 2.0 * boost::math::cdf(boost::math::complement(std_normal, std::abs(out.z(j))));
  }
  return out;
}

NoiseEstimates estimate_noise(const Dataset& data, const ScaledLassoFit& fit) {
  NoiseEstimates out;
  out.sigma1_sq = fit.sigma_hat * fit.sigma_hat;
  const VectorXd theta = ols_coef(data.s, data.y);
  out.sigma_total_sq = (data.y - data.s * theta).squaredNorm() / data.n();
  out.truncated = out.sigma1_sq > out.sigma_total_sq;
  out.sigma2_sq = std::max(out.sigma_total_sq - out.sigma1_sq, 0.0);
  return out;
}

MediationEstimate fit_incomplete(const Dataset& data_in, const InferenceConfig& cfg) {
  require_centered(data_in);
  const Dataset data = partial_out(data_in);
  const SampleMoments m = moments(data);
  const int n = data.n();
  const int p = data.p();
  const int qa = data.q();

  MediationEstimate est;
  est.mode = MediationMode::incomplete;
  est.n = n;
  est.p = p;
  est.q = data.reported_q();
  est.q_augmented = qa;
  est.level = cfg.level;

  MatrixXd x(n, p + qa);
  x << data.g, data.s;
  ScaledLassoOptions lasso = cfg.lasso;
  lasso.penalty_factor = pilot_weights(p, qa, cfg.penalize_direct);
  est.lambda0 = pick_lambda0(cfg, n, p + qa);
  est.pilot = scaled_lasso(x, data.y, est.lambda0, lasso);
  est.alpha_tilde = est.pilot.coef;
  est.noise = estimate_noise(data, est.pilot);

  est.tau = pick_tau(cfg, n, p);
  est.omega = solve_rows_with_retry(cfg, est, [&](double t) { return estimate_omega_i(m, t, cfg.rows); });
  const MatrixXd& omega = est.omega.omega;

  const MatrixXd ss_inv = invert_spd(m.sigma_ss, "exposure covariance");
  MatrixXd kron = MatrixXd::Zero(2 * qa, 2 * qa);
  kron.topLeftCorner(qa, qa) = ss_inv;
  kron.bottomRightCorner(qa, qa) = ss_inv;

  const VectorXd& alpha = est.alpha_tilde;
  const VectorXd alpha0 = alpha.head(p);
  const VectorXd alpha1 = alpha.tail(qa);

  // Debiasing form.
  const VectorXd raw = kron * (omega * m.sigma_xy);
  const VectorXd bias = kron * ((omega * m.sigma_xx - m.d_hat) * alpha);
  const VectorXd form_debias = raw - bias;

  // Residual form.
  VectorXd pilot(2 * qa);
  pilot << ss_inv * (m.sigma_sg * alpha0), alpha1;
  const VectorXd correction = kron * (omega * (x.transpose() * (data.y - x * alpha))) / n;
  const VectorXd form_resid = pilot + correction;

  est.dual_form_gap = relative_gap(form_debias, form_resid,
                                   {inf_norm(raw), inf_norm(bias), inf_norm(pilot), inf_norm(correction),
                                    input_scale(kron, omega, m.sigma_xy, m.sigma_xx, m.d_hat, alpha)});
  if (est.dual_form_gap > cfg.dual_form_tol)
    throw NumericError("incomplete-mediation estimator: debiasing and residual forms disagree (relative gap " +
                       std::to_string(est.dual_form_gap) + ")");

  MatrixXd v = est.noise.sigma1_sq * (kron * omega * m.sigma_xx * omega.transpose() * kron);
  v.topLeftCorner(qa, qa) += est.noise.sigma2_sq * ss_inv;
  v /= n;

  finish_inference(est, form_debias, v, 2);
  add_common_warnings(est, m, alpha0);
  return est;
}

MediationEstimate fit_complete(const Dataset& data_in, const InferenceConfig& cfg) {
  require_centered(data_in);
  const Dataset data = partial_out(data_in);
  const SampleMoments m = moments(data);
  const int n = data.n();
  const int p = data.p();
  const int qa = data.q();

  MediationEstimate est;
  est.mode = MediationMode::complete;
  est.n = n;
  est.p = p;
  est.q = data.reported_q();
  est.q_augmented = qa;
  est.level = cfg.level;

  ScaledLassoOptions lasso = cfg.lasso;
  lasso.penalty_factor = VectorXd();
  est.lambda0 = pick_lambda0(cfg, n, p);
  est.pilot = scaled_lasso(data.g, data.y, est.lambda0, lasso);
  est.alpha_tilde = est.pilot.coef;
  est.noise = estimate_noise(data, est.pilot);

  est.tau = pick_tau(cfg, n, p);
  est.omega = solve_rows_with_retry(cfg, est, [&](double t) { return estimate_omega_c(m, t, cfg.rows); });
  const MatrixXd& omega = est.omega.omega;
  const MatrixXd ss_inv = invert_spd(m.sigma_ss, "exposure covariance");
  const VectorXd& alpha0 = est.alpha_tilde;

  const VectorXd raw = ss_inv * (omega * m.sigma_gy);
  const VectorXd bias = ss_inv * ((omega * m.sigma_gg - m.sigma_sg) * alpha0);
  const VectorXd form_debias = raw - bias;

  const VectorXd pilot = ss_inv * (m.sigma_sg * alpha0);
  const VectorXd correction = ss_inv * (omega * (data.g.transpose() * (data.y - data.g * alpha0))) / n;
  const VectorXd form_resid = pilot + correction;

  est.dual_form_gap = relative_gap(form_debias, form_resid,
                                   {inf_norm(raw), inf_norm(bias), inf_norm(pilot), inf_norm(correction),
                                    input_scale(ss_inv, omega, m.sigma_gy, m.sigma_gg, m.sigma_sg, alpha0)});
  if (est.dual_form_gap > cfg.dual_form_tol)
    throw NumericError("complete-mediation estimator: debiasing and residual forms disagree (relative gap " +
                       std::to_string(est.dual_form_gap) + ")");

  MatrixXd v = est.noise.sigma1_sq * (ss_inv * omega * m.sigma_gg * omega.transpose() * ss_inv) +
               est.noise.sigma2_sq * ss_inv;
  v /= n;

  finish_inference(est, form_debias, v, 1);
  add_common_warnings(est, m, alpha0);
  return est;
}

VectorXd direct_effect_alt(const Dataset& data_in, const MediationEstimate& inc) {
  if (inc.mode != MediationMode::incomplete)
    throw DataError("direct_effect_alt requires an incomplete-mediation estimate");
  require_centered(data_in);
  const Dataset data = partial_out(data_in);
  const VectorXd theta = ols_coef(data.s, data.y);
  return theta.head(inc.q) - inc.b_hat;
}

}  // namespace hdmed
