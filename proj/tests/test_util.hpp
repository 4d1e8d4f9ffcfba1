#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "hdmed/core_stats.hpp"

namespace testutil {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = nd(rng);
  return m;
}

inline VectorXd gaussian_vec(int n, std::mt19937_64& rng) { return gaussian(n, 1, rng).col(0); }

inline MatrixXd center(const MatrixXd& m) { return m.rowwise() - m.colwise().mean(); }

inline double max_abs(const MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// Small mediation data set drawn from the linear model with a few active mediators.
inline hdmed::Dataset toy_dataset(int n, int p, int q, std::uint64_t seed, double c = 0.5, double a1 = 0.0) {
  std::mt19937_64 rng(seed);
  hdmed::Dataset d;
  d.s = gaussian(n, q, rng);
  MatrixXd gamma = MatrixXd::Zero(p, q);
  VectorXd a0 = VectorXd::Zero(p);
  for (int j = 0; j < std::min(p, 3); ++j) {
    gamma.row(j).setConstant(c);
    a0(j) = 1.0;
  }
  d.g = d.s * gamma.transpose() + gaussian(n, p, rng);
  d.y = d.g * a0 + d.s * VectorXd::Constant(q, a1) + gaussian_vec(n, rng);
  return d;
}

struct LpResult {
  bool feasible = false;
  bool bounded = true;
  double value = 0.0;
  VectorXd x;
};

// Dense two-phase tableau simplex with Bland's rule for
//   min c^T x  subject to  A x <= b, x >= 0.
// Slow, exact enough for tiny problems, and independent of the library solver.
inline LpResult simplex_leq(const MatrixXd& a, const VectorXd& b, const VectorXd& c) {
  using ld = long double;
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  int n_art = 0;
  for (int i = 0; i < m; ++i) n_art += b(i) < 0;
  const int cols = n + m + n_art;
  std::vector<std::vector<ld>> t(m, std::vector<ld>(cols + 1, 0.0L));
  std::vector<int> basis(m);
  int art = n + m;
  for (int i = 0; i < m; ++i) {
    const ld sgn = b(i) < 0 ? -1.0L : 1.0L;
    for (int j = 0; j < n; ++j) t[i][j] = sgn * a(i, j);
    t[i][n + i] = sgn;
    t[i][cols] = sgn * b(i);
    if (b(i) < 0) {
      t[i][art] = 1.0L;
      basis[i] = art++;
    } else {
      basis[i] = n + i;
    }
  }
  const ld eps = 1e-12L;

  auto pivot = [&](int r, int col) {
    const ld pv = t[r][col];
    for (auto& v : t[r]) v /= pv;
    for (int i = 0; i < m; ++i) {
      if (i == r || t[i][col] == 0.0L) continue;
      const ld f = t[i][col];
      for (int j = 0; j <= cols; ++j) t[i][j] -= f * t[r][j];
    }
    basis[r] = col;
  };

  // Returns false when unbounded.
  auto optimize = [&](const std::vector<ld>& cost, const std::vector<bool>& allowed) {
    for (int iter = 0; iter < 100000; ++iter) {
      int enter = -1;
      for (int j = 0; j < cols && enter < 0; ++j) {
        if (!allowed[j]) continue;
        ld r = cost[j];
        for (int i = 0; i < m; ++i) r -= cost[basis[i]] * t[i][j];
        if (r < -eps) enter = j;
      }
      if (enter < 0) return true;
      int leave = -1;
      ld best = std::numeric_limits<ld>::infinity();
      for (int i = 0; i < m; ++i) {
        if (t[i][enter] > eps) {
          const ld ratio = t[i][cols] / t[i][enter];
          if (ratio < best - eps || (std::fabs(ratio - best) <= eps && basis[i] < basis[leave])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    return true;
  };

  LpResult res;
  std::vector<bool> allowed(cols, true);
  if (n_art > 0) {
    std::vector<ld> cost1(cols, 0.0L);
    for (int j = n + m; j < cols; ++j) cost1[j] = 1.0L;
    optimize(cost1, allowed);
    ld infeas = 0.0L;
    for (int i = 0; i < m; ++i)
      if (basis[i] >= n + m) infeas += t[i][cols];
    if (infeas > 1e-9L) return res;
    for (int i = 0; i < m; ++i) {
      if (basis[i] < n + m) continue;
      for (int j = 0; j < n + m; ++j) {
        if (std::fabs(t[i][j]) > 1e-9L) {
          pivot(i, j);
          break;
        }
      }
    }
    for (int j = n + m; j < cols; ++j) allowed[j] = false;
  }
  std::vector<ld> cost2(cols, 0.0L);
  for (int j = 0; j < n; ++j) cost2[j] = c(j);
  res.feasible = true;
  res.bounded = optimize(cost2, allowed);
  res.x = VectorXd::Zero(n);
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) res.x(basis[i]) = static_cast<double>(t[i][cols]);
  res.value = c.dot(res.x);
  return res;
}

// Row problem min ||w||_1 s.t. ||sigma w - d||_inf <= tau through the simplex.
inline LpResult row_oracle(const MatrixXd& sigma, const VectorXd& d, double tau) {
  const int m = static_cast<int>(sigma.rows());
  MatrixXd a(2 * m, 2 * m);
  a << sigma, -sigma, -sigma, sigma;
  VectorXd b(2 * m);
  b << (d.array() + tau).matrix(), (tau - d.array()).matrix();
  return simplex_leq(a, b, VectorXd::Ones(2 * m));
}

}  // namespace testutil
