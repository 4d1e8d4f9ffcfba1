#include "hdmed/l1_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hdmed/error.hpp"
#include "hdmed/parallel.hpp"

namespace hdmed {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Largest step in (0, 1] keeping v + a * dv >= 0.
double max_step(const VectorXd& v, const VectorXd& dv) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  return a;
}

void check_inputs(const MatrixXd& sigma, const VectorXd& d, double tau) {
  if (sigma.rows() != sigma.cols()) throw DataError("solve_row: sigma must be square");
  if (d.size() != sigma.rows()) throw DataError("solve_row: target length does not match sigma");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw DataError("solve_row: tau must be finite and nonnegative");
  if (!sigma.allFinite() || !d.allFinite()) throw DataError("solve_row: non-finite input");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw DataError("solve_row: sigma is not symmetric");
}

// Chebyshev fit  min_y ||B y - d||_inf  by a primal-dual interior point on
//   min t  s.t.  B y - t <= d,  -B y - t <= -d   (y, t free).
// Normal equations are (r+1) x (r+1) with r = cols(B). Returns the optimal t.
double chebyshev_lp(const MatrixXd& bmat, const VectorXd& d, double tol, int max_iter) {
  const Eigen::Index m = d.size();
  const Eigen::Index r = bmat.cols();
  MatrixXd a(2 * m, r + 1);
  a << bmat, -VectorXd::Ones(m), -bmat, -VectorXd::Ones(m);
  VectorXd b(2 * m);
  b << d, -d;
  VectorXd c = VectorXd::Zero(r + 1);
  c(r) = 1.0;

  // Strictly feasible start: y = 0, t above ||d||_inf, uniform multipliers.
  VectorXd x = VectorXd::Zero(r + 1);
  x(r) = d.lpNorm<Eigen::Infinity>() + 1.0;
  VectorXd s = b - a * x;
  VectorXd lam = VectorXd::Constant(2 * m, 1.0 / (2.0 * static_cast<double>(m)));
  const double total = static_cast<double>(2 * m);

  for (int it = 0; it < max_iter; ++it) {
    const VectorXd rp = a * x + s - b;
    const VectorXd rd = c + a.transpose() * lam;
    const double mu = s.dot(lam) / total;
    const double gap = x(r) + b.dot(lam);
    if (rp.lpNorm<Eigen::Infinity>() <= tol * (1.0 + x(r)) && rd.lpNorm<Eigen::Infinity>() <= tol &&
        std::abs(gap) <= tol * (1.0 + std::abs(x(r))))
      break;
    const VectorXd wdiag = lam.cwiseQuotient(s);
    MatrixXd k = a.transpose() * wdiag.asDiagonal() * a;
    k.diagonal().array() += 1e-14 * std::max(1.0, k.diagonal().maxCoeff());
    Eigen::LDLT<MatrixXd> ldlt(k);

    auto solve = [&](const VectorXd& rc, VectorXd& dx, VectorXd& ds, VectorXd& dl) {
      const VectorXd inner = wdiag.cwiseProduct(rp - rc.cwiseQuotient(lam));
      dx = ldlt.solve(-rd - a.transpose() * inner);
      dl = wdiag.cwiseProduct(a * dx) + inner;
      ds = -rp - a * dx;
    };
    VectorXd dx, ds, dl;
    solve(s.cwiseProduct(lam), dx, ds, dl);
    const double ap_aff = max_step(s, ds);
    const double ad_aff = max_step(lam, dl);
    const double mu_aff = (s + ap_aff * ds).dot(lam + ad_aff * dl) / total;
    const double sig = std::pow(std::max(mu_aff, 0.0) / mu, 3);
    solve(s.cwiseProduct(lam) + ds.cwiseProduct(dl) - VectorXd::Constant(2 * m, sig * mu), dx, ds, dl);
    const double ap = std::min(1.0, 0.995 * max_step(s, ds));
    const double ad = std::min(1.0, 0.995 * max_step(lam, dl));
    x += ap * dx;
    s += ap * ds;
    lam += ad * dl;
  }
  // Achieved residual of the final y; equals the optimum up to tol.
  return (bmat * x.head(r) - d).lpNorm<Eigen::Infinity>();
}

struct IpmResult {
  VectorXd omega;
  int iterations = 0;
  bool converged = false;
  bool diverging = false;
};

// Primal-dual interior point specialised to the row problem. With
// w = x+ - x-, the LP is  min 1^T x  s.t.  [S -S; -S S] x <= [d + tau; tau - d],
// x >= 0. The 2m x 2m normal equations collapse to one m x m system
// (H + S D S) u = ...  where D = diag(x+/z+ + x-/z-) and H is a diagonal
// built from the constraint slacks.
IpmResult ipm_row(const MatrixXd& sigma, const VectorXd& d, double tau, const RowSolverOptions& opts) {
  const Eigen::Index m = d.size();
  VectorXd xp = VectorXd::Ones(m), xm = VectorXd::Ones(m);
  VectorXd zp = VectorXd::Ones(m), zm = VectorXd::Ones(m);
  VectorXd s1 = VectorXd::Ones(m), s2 = VectorXd::Ones(m);
  VectorXd l1 = VectorXd::Ones(m), l2 = VectorXd::Ones(m);
  const VectorXd b1 = d.array() + tau;
  const VectorXd b2 = tau - d.array();
  const double bnorm = 1.0 + std::max(b1.lpNorm<Eigen::Infinity>(), b2.lpNorm<Eigen::Infinity>());
  const double total = 4.0 * static_cast<double>(m);

  IpmResult out;
  VectorXd best;
  bool have_best = false;
  std::vector<double> pinf_hist;
  MatrixXd normal(m, m);
  MatrixXd scaled(m, m);
  for (int it = 0; it < opts.ipm_max_iter; ++it) {
    const VectorXd v = sigma * (xp - xm);
    const VectorXd rp1 = v + s1 - b1;
    const VectorXd rp2 = -v + s2 - b2;
    const VectorXd sw = sigma * (l1 - l2);
    const VectorXd rdp = (1.0 + sw.array()).matrix() - zp;
    const VectorXd rdm = (1.0 - sw.array()).matrix() - zm;
    const double primal = xp.sum() + xm.sum();
    const double dual = -(b1.dot(l1) + b2.dot(l2));
    const double mu = (xp.dot(zp) + xm.dot(zm) + s1.dot(l1) + s2.dot(l2)) / total;
    const double pinf = std::max(rp1.lpNorm<Eigen::Infinity>(), rp2.lpNorm<Eigen::Infinity>());
    const double dinf = std::max(rdp.lpNorm<Eigen::Infinity>(), rdm.lpNorm<Eigen::Infinity>());
    out.iterations = it;
    const double rel_gap = std::abs(primal - dual) / (1.0 + std::abs(primal));
    if (!std::isfinite(pinf) || !std::isfinite(dinf) || !std::isfinite(rel_gap)) {
      out.diverging = true;
      break;
    }
    if (pinf <= opts.ipm_tol * bnorm && dinf <= opts.ipm_tol * 2.0 && rel_gap <= opts.ipm_tol) {
      out.converged = true;
      best = xp - xm;
      break;
    }
    // Near-optimal iterate kept in case the tail stalls at rounding level.
    if (pinf <= 10.0 * opts.ipm_tol * bnorm && dinf <= 10.0 * opts.ipm_tol && rel_gap <= 1e3 * opts.ipm_tol) {
      best = xp - xm;
      have_best = true;
    }
    pinf_hist.push_back(pinf);
    // Primal residual that stops shrinking while the dual runs away: no
    // feasible point (or one with enormous l1 norm).
    if (it >= 20 && pinf > 0.9 * pinf_hist[static_cast<std::size_t>(it - 10)] && pinf > 1e3 * opts.ipm_tol * bnorm) {
      out.diverging = true;
      break;
    }
    if (dual > 1e12 * (1.0 + primal)) {
      out.diverging = true;
      break;
    }

    const VectorXd dp = xp.cwiseQuotient(zp);
    const VectorXd dm = xm.cwiseQuotient(zm);
    const VectorXd dsum = dp + dm;
    const VectorXd e1 = s1.cwiseQuotient(l1);
    const VectorXd e2 = s2.cwiseQuotient(l2);
    const VectorXd h = (e1.cwiseProduct(e2)).cwiseQuotient(e1 + e2);

    scaled = sigma * dsum.cwiseSqrt().asDiagonal();
    normal.setZero();
    normal.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
    normal.diagonal() += h;
    const double reg = 1e-15 * std::max(1.0, normal.diagonal().maxCoeff());
    normal.diagonal().array() += reg;
    Eigen::LLT<MatrixXd, Eigen::Lower> llt(normal);
    Eigen::LDLT<MatrixXd, Eigen::Lower> ldlt;
    const bool use_llt = llt.info() == Eigen::Success;
    if (!use_llt) ldlt.compute(normal);

    // Solves the reduced Newton system for one right-hand side.
    struct Step {
      VectorXd dxp, dxm, dzp, dzm, ds1, ds2, dl1, dl2;
    };
    // Newton step for the linearized KKT system; ep1..edm are the primal and
    // dual residuals to cancel, rxp..rs2 the complementarity residuals.
    auto solve_newton = [&](const VectorXd& ep1, const VectorXd& ep2, const VectorXd& edp, const VectorXd& edm,
                            const VectorXd& rxp, const VectorXd& rxm, const VectorXd& rs1, const VectorXd& rs2) {
      const VectorXd gp = dp.cwiseProduct(edp + rxp.cwiseQuotient(xp));
      const VectorXd gm = dm.cwiseProduct(edm + rxm.cwiseQuotient(xm));
      const VectorXd sg = sigma * (gp - gm);
      const VectorXd r1 = ep1 - sg - rs1.cwiseQuotient(l1);
      const VectorXd r2 = ep2 + sg - rs2.cwiseQuotient(l2);
      const VectorXd rhs = h.cwiseProduct(r1.cwiseQuotient(e1) - r2.cwiseQuotient(e2));
      const VectorXd w = use_llt ? VectorXd(llt.solve(rhs)) : VectorXd(ldlt.solve(rhs));
      const VectorXd mw = normal.selfadjointView<Eigen::Lower>() * w - (h.array() + reg).matrix().cwiseProduct(w);
      const VectorXd sw_step = sigma * w;
      Step st;
      // e1 .* dl1 = r1 - M w and e2 .* dl2 = r2 + M w, with dl1 - dl2 = w. Use
      // whichever equation divides by the larger slack ratio.
      st.dl1.resize(m);
      st.dl2.resize(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        if (e1(i) >= e2(i)) {
          st.dl1(i) = (r1(i) - mw(i)) / e1(i);
          st.dl2(i) = st.dl1(i) - w(i);
        } else {
          st.dl2(i) = (r2(i) + mw(i)) / e2(i);
          st.dl1(i) = st.dl2(i) + w(i);
        }
      }
      st.dxp = -gp - dp.cwiseProduct(sw_step);
      st.dxm = -gm + dm.cwiseProduct(sw_step);
      // Linear rows taken exactly so the residuals shrink with the step.
      const VectorXd sdx = sigma * (st.dxp - st.dxm);
      st.ds1 = -ep1 - sdx;
      st.ds2 = -ep2 + sdx;
      st.dzp = edp + sw_step;
      st.dzm = edm - sw_step;
      return st;
    };
    // Iterative refinement on the complementarity rows, which absorb the
    // error of the reduced solve when the scaling is extreme.
    const VectorXd zero = VectorXd::Zero(m);
    auto newton = [&](const VectorXd& rxp, const VectorXd& rxm, const VectorXd& rs1, const VectorXd& rs2) {
      Step st = solve_newton(rp1, rp2, rdp, rdm, rxp, rxm, rs1, rs2);
      for (int pass = 0; pass < 3; ++pass) {
        const VectorXd cxp = zp.cwiseProduct(st.dxp) + xp.cwiseProduct(st.dzp) + rxp;
        const VectorXd cxm = zm.cwiseProduct(st.dxm) + xm.cwiseProduct(st.dzm) + rxm;
        const VectorXd c1 = l1.cwiseProduct(st.ds1) + s1.cwiseProduct(st.dl1) + rs1;
        const VectorXd c2 = l2.cwiseProduct(st.ds2) + s2.cwiseProduct(st.dl2) + rs2;
        const double err = std::max({cxp.lpNorm<Eigen::Infinity>(), cxm.lpNorm<Eigen::Infinity>(),
                                     c1.lpNorm<Eigen::Infinity>(), c2.lpNorm<Eigen::Infinity>()});
        if (!(err > 1e-14 * mu)) break;
        const Step fix = solve_newton(zero, zero, zero, zero, cxp, cxm, c1, c2);
        st.dxp += fix.dxp;
        st.dxm += fix.dxm;
        st.dzp += fix.dzp;
        st.dzm += fix.dzm;
        st.ds1 += fix.ds1;
        st.ds2 += fix.ds2;
        st.dl1 += fix.dl1;
        st.dl2 += fix.dl2;
      }
      return st;
    };
    auto primal_step = [&](const Step& st) {
      return std::min({max_step(xp, st.dxp), max_step(xm, st.dxm), max_step(s1, st.ds1), max_step(s2, st.ds2)});
    };
    auto dual_step = [&](const Step& st) {
      return std::min({max_step(zp, st.dzp), max_step(zm, st.dzm), max_step(l1, st.dl1), max_step(l2, st.dl2)});
    };

    const Step aff = newton(xp.cwiseProduct(zp), xm.cwiseProduct(zm), s1.cwiseProduct(l1), s2.cwiseProduct(l2));
    const double ap_aff = primal_step(aff);
    const double ad_aff = dual_step(aff);
    const double mu_aff = ((xp + ap_aff * aff.dxp).dot(zp + ad_aff * aff.dzp) +
                           (xm + ap_aff * aff.dxm).dot(zm + ad_aff * aff.dzm) +
                           (s1 + ap_aff * aff.ds1).dot(l1 + ad_aff * aff.dl1) +
                           (s2 + ap_aff * aff.ds2).dot(l2 + ad_aff * aff.dl2)) /
                          total;
    const double centering = std::pow(std::max(mu_aff, 0.0) / mu, 3);
    const VectorXd target = VectorXd::Constant(m, centering * mu);
    const Step st = newton(xp.cwiseProduct(zp) + aff.dxp.cwiseProduct(aff.dzp) - target,
                           xm.cwiseProduct(zm) + aff.dxm.cwiseProduct(aff.dzm) - target,
                           s1.cwiseProduct(l1) + aff.ds1.cwiseProduct(aff.dl1) - target,
                           s2.cwiseProduct(l2) + aff.ds2.cwiseProduct(aff.dl2) - target);
    const double ap = std::min(1.0, 0.995 * primal_step(st));
    const double ad = std::min(1.0, 0.995 * dual_step(st));
    xp += ap * st.dxp;
    xm += ap * st.dxm;
    s1 += ap * st.ds1;
    s2 += ap * st.ds2;
    zp += ad * st.dzp;
    zm += ad * st.dzm;
    l1 += ad * st.dl1;
    l2 += ad * st.dl2;
  }
  if (!out.converged && !out.diverging && have_best) out.converged = true;
  out.omega = out.converged && best.size() ? best : VectorXd(xp - xm);
  return out;
}

// Power iteration for the largest eigenvalue of a symmetric PSD matrix,
// inflated slightly so the result is an upper bound in practice.
double spectral_bound(const MatrixXd& sigma) {
  const Eigen::Index m = sigma.rows();
  VectorXd v = VectorXd::Constant(m, 1.0 / std::sqrt(static_cast<double>(m)));
  double est = 0.0;
  for (int it = 0; it < 200; ++it) {
    VectorXd w = sigma * v;
    const double nrm = w.norm();
    if (nrm == 0.0) return 0.0;
    v = w / nrm;
    if (std::abs(nrm - est) <= 1e-10 * nrm) {
      est = nrm;
      break;
    }
    est = nrm;
  }
  return 1.05 * est;
}

struct AdmmResult {
  VectorXd omega;
  int iterations = 0;
  bool converged = false;
};

// Linearized ADMM on  min ||w||_1  s.t.  r = S w - d,  ||r||_inf <= tau.
AdmmResult admm_row(const MatrixXd& sigma, const VectorXd& d, double tau, const RowSolverOptions& opts) {
  const Eigen::Index m = d.size();
  AdmmResult out;
  const double rho = std::max(spectral_bound(sigma), 1e-12);
  const double step = 1.0 / (rho * rho);  // 1 / ||S||_2^2
  VectorXd w = VectorXd::Zero(m);
  VectorXd u = VectorXd::Zero(m);
  VectorXd sw = VectorXd::Zero(m);
  VectorXd r(m);
  const double scale = 1.0 + d.lpNorm<Eigen::Infinity>();
  for (int it = 1; it <= opts.admm_max_iter; ++it) {
    const VectorXd r_old = r.size() == m ? r : VectorXd(VectorXd::Zero(m));
    r = (sw - d + u).cwiseMax(-tau).cwiseMin(tau);
    const VectorXd grad = sigma * (sw - d - r + u);
    const VectorXd arg = w - step * grad;
    const double thr = step / rho;
    w = arg.unaryExpr([thr](double a) { return a > thr ? a - thr : (a < -thr ? a + thr : 0.0); });
    sw = sigma * w;
    const VectorXd primal = sw - d - r;
    u += primal;
    const double pres = primal.lpNorm<Eigen::Infinity>();
    const double dres = rho * (sigma * (r - r_old)).lpNorm<Eigen::Infinity>();
    out.iterations = it;
    if (pres <= opts.admm_tol * scale && dres <= opts.admm_tol * scale) {
      out.converged = true;
      break;
    }
  }
  out.omega = w;
  return out;
}

double residual_inf(const MatrixXd& sigma, const VectorXd& d, const VectorXd& w) {
  return (sigma * w - d).lpNorm<Eigen::Infinity>();
}

// Zeroes entries that are negligible relative to the largest, when doing so
// keeps the point feasible.
void clean_small(const MatrixXd& sigma, const VectorXd& d, double tau, double feas_tol, VectorXd& w) {
  const double big = w.lpNorm<Eigen::Infinity>();
  if (big == 0.0) return;
  VectorXd trimmed = w;
  for (Eigen::Index j = 0; j < w.size(); ++j)
    if (std::abs(trimmed(j)) <= 1e-9 * big) trimmed(j) = 0.0;
  if (residual_inf(sigma, d, trimmed) <= tau + 0.5 * feas_tol) w = trimmed;
}

}  // namespace

double min_feasible_tau(const MatrixXd& sigma, const VectorXd& d, const RowSolverOptions& opts) {
  (void)opts;
  check_inputs(sigma, d, 0.0);
  // sigma w ranges over the span of the eigenvectors with nonzero eigenvalues.
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma);
  if (es.info() != Eigen::Success) throw NumericError("min_feasible_tau: eigen decomposition failed");
  const VectorXd& ev = es.eigenvalues();
  const double top = std::max(std::abs(ev.maxCoeff()), std::abs(ev.minCoeff()));
  if (top == 0.0) return d.lpNorm<Eigen::Infinity>();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < ev.size(); ++j)
    if (ev(j) > 1e-12 * top) keep.push_back(j);
  MatrixXd basis(sigma.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) basis.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]);
  if (basis.cols() == sigma.rows()) return 0.0;
  return chebyshev_lp(basis, d, 1e-11, 200);
}

RowSolution solve_row_detailed(const MatrixXd& sigma, const VectorXd& d, double tau, const RowSolverOptions& opts) {
  check_inputs(sigma, d, tau);
  const Eigen::Index m = d.size();
  RowSolution sol;

  // Zero is feasible exactly when ||d||_inf <= tau, and then it is optimal.
  if (d.lpNorm<Eigen::Infinity>() <= tau) {
    sol.omega = VectorXd::Zero(m);
    sol.residual = d.lpNorm<Eigen::Infinity>();
    return sol;
  }

  bool have = false;
  if (opts.algorithm == RowAlgorithm::admm) {
    AdmmResult admm = admm_row(sigma, d, tau, opts);
    sol.iterations = admm.iterations;
    if (admm.converged && residual_inf(sigma, d, admm.omega) <= tau + opts.feas_tol) {
      sol.omega = std::move(admm.omega);
      have = true;
    } else {
      sol.used_fallback = true;
    }
  }

  if (!have) {
    IpmResult ipm = ipm_row(sigma, d, tau, opts);
    sol.iterations += ipm.iterations;
    const double res = residual_inf(sigma, d, ipm.omega);
    if (!ipm.converged || res > tau + opts.feas_tol) {
      const double best = min_feasible_tau(sigma, d, opts);
      if (best > tau + opts.feas_tol)
        throw InfeasibleError("l1 row problem infeasible at tau=" + std::to_string(tau) +
                                  "; smallest achievable residual is " + std::to_string(best),
                              best);
      throw NumericError("interior point did not converge for the l1 row problem (tau=" + std::to_string(tau) +
                         ", residual " + std::to_string(res) + ")");
    }
    sol.omega = std::move(ipm.omega);
  }

  clean_small(sigma, d, tau, opts.feas_tol, sol.omega);
  sol.residual = residual_inf(sigma, d, sol.omega);
  sol.l1 = sol.omega.lpNorm<1>();
  return sol;
}

double default_tau(int n, int p) {
  if (n < 1 || p < 1) throw DataError("default_tau: need n >= 1 and p >= 1");
  return std::sqrt(std::log(static_cast<double>(p)) / n) / 3.0;
}

DebiasingMatrix solve_rows(const MatrixXd& sigma, const MatrixXd& targets, double tau, const RowSolverOptions& opts) {
  const int k = static_cast<int>(targets.rows());
  DebiasingMatrix out;
  out.tau = tau;
  out.omega.resize(k, sigma.rows());
  out.row_residuals.resize(k);
  out.row_l1.resize(k);
  std::vector<int> iters(static_cast<std::size_t>(k), 0);
  parallel_for(k, opts.threads, [&](int i) {
    RowSolution sol;
    try {
      sol = solve_row_detailed(sigma, targets.row(i).transpose(), tau, opts);
    } catch (const InfeasibleError& e) {
      throw InfeasibleError("row " + std::to_string(i) + ": " + e.what(), e.min_residual());
    } catch (const NumericError& e) {
      throw NumericError("row " + std::to_string(i) + ": " + e.what());
    }
    out.omega.row(i) = sol.omega.transpose();
    out.row_residuals(i) = sol.residual;
    out.row_l1(i) = sol.l1;
    iters[static_cast<std::size_t>(i)] = sol.iterations;
  });
  for (int it : iters) out.total_iterations += it;
  return out;
}

DebiasingMatrix estimate_omega_c(const SampleMoments& m, double tau, const RowSolverOptions& opts) {
  return solve_rows(m.sigma_gg, m.sigma_sg, tau, opts);
}

DebiasingMatrix estimate_omega_i(const SampleMoments& m, double tau, const RowSolverOptions& opts) {
  return solve_rows(m.sigma_xx, m.d_hat, tau, opts);
}

}  // namespace hdmed
