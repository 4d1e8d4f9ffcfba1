#include "hdmed/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hdmed/error.hpp"
#include "hdmed/parallel.hpp"
#include "hdmed/random.hpp"

namespace hdmed {

const char* to_string(BaselineMethod m) { return m == BaselineMethod::ols ? "ols" : "naive_bootstrap"; }

BaselineEstimate ols_total_effect(const Dataset& data_in, double level) {
  validate(data_in);
  if (!data_in.centered) throw DataError("data must be centered; call prepare() first");
  const Dataset data = partial_out(data_in);
  const int n = data.n();
  const int q = data.reported_q();

  const MatrixXd ss = data.s.transpose() * data.s / n;
  const MatrixXd ss_inv = invert_spd(ss, "exposure covariance");
  const VectorXd coef = ss_inv * (data.s.transpose() * data.y / n);
  double sigma_sq = (data.y - data.s * coef).squaredNorm() / n;
  // Rounding residue of an exact fit.
  if (sigma_sq <= 1e-24 * data.y.squaredNorm() / n) sigma_sq = 0.0;

  BaselineEstimate out;
  out.method = BaselineMethod::ols;
  out.point = coef.head(q);
  MatrixXd var = (sigma_sq / n) * ss_inv.topLeftCorner(q, q);
  var = 0.5 * (var + var.transpose());
  const WaldResult w = wald(out.point, var, level);
  out.variance = var;
  out.lower = w.lower;
  out.upper = w.upper;
  out.p_value = w.p;
  if (std::any_of(w.degenerate.begin(), w.degenerate.end(), [](bool b) { return b; }))
    out.warnings.push_back({"zero_variance", "residual variance is zero; the fit is exact"});
  return out;
}

double naive_lambda(const Dataset& data, MediationMode mode, NaiveLambdaRule rule) {
  (void)rule;
  const int n = data.n();
  MatrixXd x;
  if (mode == MediationMode::complete) {
    x = data.g;
  } else {
    x.resize(n, data.p() + data.q());
    x << data.g, data.s;
  }
  const int m = static_cast<int>(x.cols());
  const double lambda0 = penalty_level(n, m, PenaltyScheme::universal);
  const ScaledLassoFit prelim = scaled_lasso(x, data.y, lambda0);
  return lambda0 * prelim.sigma_hat;
}

VectorXd naive_indirect(const Dataset& data, double lambda, MediationMode mode, const LassoOptions& opts) {
  validate(data);
  if (!(lambda >= 0.0)) throw DataError("naive_indirect: lambda must be nonnegative");
  const int n = data.n();
  const int p = data.p();
  MatrixXd x;
  if (mode == MediationMode::complete) {
    x = data.g;
  } else {
    x.resize(n, p + data.q());
    x << data.g, data.s;
  }
  VectorXd scale = (x.colwise().squaredNorm().transpose() / n).cwiseSqrt();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (scale(j) > 0.0) {
      x.col(j) /= scale(j);
    } else {
      scale(j) = 1.0;
      x.col(j).setZero();
    }
  }
  const VectorXd beta = lasso_cd(x, data.y, lambda, opts).cwiseQuotient(scale);
  const MatrixXd ss = data.s.transpose() * data.s / n;
  const MatrixXd sg = data.s.transpose() * data.g / n;
  const VectorXd out = invert_spd(ss, "exposure covariance") * (sg * beta.head(p));
  return out.head(data.reported_q());
}

std::pair<double, double> percentile_interval(std::vector<double> values, double level) {
  if (values.empty()) throw DataError("percentile_interval: no replicates");
  if (!(level > 0.0 && level < 1.0)) throw DataError("confidence level must lie in (0, 1)");
  std::sort(values.begin(), values.end());
  const double b = static_cast<double>(values.size());
  const double a = 1.0 - level;
  auto order_stat = [&](double frac) {
    // Small epsilon keeps exact products like 500 * 0.025 = 12.5 from rounding up a rank.
    auto k = static_cast<long>(std::ceil(b * frac - 1e-9));
    k = std::clamp<long>(k, 1, static_cast<long>(values.size()));
    return values[static_cast<std::size_t>(k - 1)];
  };
  return {order_stat(a / 2.0), order_stat(1.0 - a / 2.0)};
}

BaselineEstimate naive_bootstrap(const Dataset& data_in, const BootstrapOptions& opts) {
  if (opts.n_boot < 100) throw DataError("naive_bootstrap: need at least 100 resamples");
  validate(data_in);
  if (!data_in.centered) throw DataError("data must be centered; call prepare() first");
  const Dataset data = partial_out(data_in);
  const int n = data.n();
  const int q = data.reported_q();

  BaselineEstimate out;
  out.method = BaselineMethod::naive_bootstrap;
  out.p_value_rigorous = false;
  // Full-data moments first: a singular exposure block fails here, not per resample.
  (void)moments(data);
  out.lambda = naive_lambda(data, opts.mode, opts.lambda_rule);
  out.point = naive_indirect(data, out.lambda, opts.mode);

  const int nb = opts.n_boot;
  std::vector<VectorXd> reps(static_cast<std::size_t>(nb));
  std::vector<char> ok(static_cast<std::size_t>(nb), 0);
  parallel_for(nb, opts.threads, [&](int b) {
    Rng rng(split_seed(opts.seed, static_cast<std::uint64_t>(b)));
    std::uniform_int_distribution<int> pick(0, n - 1);
    Dataset boot;
    boot.y.resize(n);
    boot.g.resize(n, data.p());
    boot.s.resize(n, data.q());
    boot.n_reported = data.n_reported;
    for (int i = 0; i < n; ++i) {
      const int r = pick(rng);
      boot.y(i) = data.y(r);
      boot.g.row(i) = data.g.row(r);
      boot.s.row(i) = data.s.row(r);
    }
    try {
      boot = prepare(boot);
      reps[static_cast<std::size_t>(b)] = naive_indirect(boot, out.lambda, opts.mode);
      ok[static_cast<std::size_t>(b)] = 1;
    } catch (const NumericError&) {
      // Singular resample: counted and skipped below.
    }
  });

  int kept = 0;
  for (char flag : ok) kept += flag;
  out.n_skipped = nb - kept;
  if (out.n_skipped > opts.max_skip_fraction * nb)
    throw NumericError("naive_bootstrap: " + std::to_string(out.n_skipped) + " of " + std::to_string(nb) +
                       " resamples had a singular exposure covariance");
  if (out.n_skipped > 0)
    out.warnings.push_back({"bootstrap_skipped", std::to_string(out.n_skipped) + " singular resamples skipped"});

  out.n_boot = kept;
  out.replicates.resize(kept, q);
  int row = 0;
  for (int b = 0; b < nb; ++b)
    if (ok[static_cast<std::size_t>(b)]) out.replicates.row(row++) = reps[static_cast<std::size_t>(b)].transpose();

  out.lower.resize(q);
  out.upper.resize(q);
  out.p_value.resize(q);
  for (int j = 0; j < q; ++j) {
    std::vector<double> col(static_cast<std::size_t>(kept));
    int below = 0, above = 0;
    for (int b = 0; b < kept; ++b) {
      const double v = out.replicates(b, j);
      col[static_cast<std::size_t>(b)] = v;
      below += v <= 0.0;
      above += v >= 0.0;
    }
    const auto [lo, hi] = percentile_interval(col, opts.level);
    out.lower(j) = lo;
    out.upper(j) = hi;
    out.p_value(j) = std::min(1.0, 2.0 * std::min(below, above) / static_cast<double>(kept));
  }
  out.warnings.push_back({"bootstrap_not_rigorous",
                          "percentile intervals for the naive lasso product have no coverage guarantee"});
  return out;
}

}  // namespace hdmed
