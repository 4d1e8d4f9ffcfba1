#include <doctest.h>

#include <boost/math/distributions/normal.hpp>

#include "hdmed/error.hpp"
#include "hdmed/scaled_lasso.hpp"
#include "test_util.hpp"

using namespace hdmed;
using testutil::gaussian;

namespace {

MatrixXd standardized(MatrixXd x) {
  x = testutil::center(x);
  const int n = static_cast<int>(x.rows());
  for (int j = 0; j < x.cols(); ++j) x.col(j) /= std::sqrt(x.col(j).squaredNorm() / n);
  return x;
}

double lasso_objective(const MatrixXd& x, const VectorXd& y, double lambda, const VectorXd& b) {
  return (y - x * b).squaredNorm() / (2.0 * x.rows()) + lambda * b.lpNorm<1>();
}

}  // namespace

TEST_CASE("lasso returns zero above the null threshold") {
  std::mt19937_64 rng(1);
  const MatrixXd x = standardized(gaussian(40, 6, rng));
  const VectorXd y = testutil::center(testutil::gaussian_vec(40, rng));
  const double lmax = (x.transpose() * y).cwiseAbs().maxCoeff() / 40.0;
  CHECK(lasso_cd(x, y, lmax * 1.0001).cwiseAbs().maxCoeff() == 0.0);
  CHECK(lasso_cd(x, y, lmax * 0.9).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("lasso on one orthonormal column is a soft threshold") {
  std::mt19937_64 rng(2);
  const MatrixXd x = standardized(gaussian(30, 1, rng));
  const VectorXd y = 0.8 * x.col(0) + 0.3 * testutil::center(testutil::gaussian_vec(30, rng));
  const double ols = x.col(0).dot(y) / 30.0;
  const double lambda = 0.2;
  const double expected = std::copysign(std::max(std::abs(ols) - lambda, 0.0), ols);
  CHECK(lasso_cd(x, y, lambda)(0) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("lasso matches a support-enumeration oracle") {
  // For each sign pattern on each support the stationarity system is linear;
  // the optimum is the best candidate that satisfies its own sign pattern.
  for (int rep = 0; rep < 10; ++rep) {
    std::mt19937_64 rng(100 + rep);
    const MatrixXd x = standardized(gaussian(10, 3, rng));
    const VectorXd y = testutil::center(x * VectorXd{{1.0, -0.5, 0.0}} + testutil::gaussian_vec(10, rng));
    const double lambda = 0.15;
    double best = lasso_objective(x, y, lambda, VectorXd::Zero(3));
    for (int mask = 1; mask < 8; ++mask) {
      std::vector<int> sup;
      for (int j = 0; j < 3; ++j)
        if (mask & (1 << j)) sup.push_back(j);
      const int k = static_cast<int>(sup.size());
      for (int signs = 0; signs < (1 << k); ++signs) {
        MatrixXd xs(10, k);
        VectorXd sg(k);
        for (int a = 0; a < k; ++a) {
          xs.col(a) = x.col(sup[a]);
          sg(a) = (signs & (1 << a)) ? -1.0 : 1.0;
        }
        const VectorXd bs = (xs.transpose() * xs / 10.0).ldlt().solve(xs.transpose() * y / 10.0 - lambda * sg);
        VectorXd b = VectorXd::Zero(3);
        for (int a = 0; a < k; ++a) b(sup[a]) = bs(a);
        best = std::min(best, lasso_objective(x, y, lambda, b));
      }
    }
    const VectorXd b = lasso_cd(x, y, lambda);
    CHECK(std::abs(lasso_objective(x, y, lambda, b) - best) < 1e-8);
  }
}

TEST_CASE("lasso KKT conditions hold and unpenalized coordinates are free") {
  std::mt19937_64 rng(3);
  const MatrixXd x = standardized(gaussian(60, 80, rng));
  VectorXd truth = VectorXd::Zero(80);
  truth.head(4) << 1.0, -1.0, 0.5, 0.7;
  const VectorXd y = testutil::center(x * truth + testutil::gaussian_vec(60, rng));
  VectorXd w = VectorXd::Ones(80);
  w(79) = 0.0;
  const VectorXd b = lasso_cd(x, y, 0.1, {}, &w);
  CHECK(lasso_kkt_violation(x, y, 0.1, b, &w) <= 1e-7);
  CHECK(std::abs(x.col(79).dot(y - x * b) / 60.0) <= 1e-7);
}

TEST_CASE("penalty levels") {
  CHECK(penalty_level(300, 500, PenaltyScheme::universal) == doctest::Approx(std::sqrt(2.0 * std::log(500.0) / 300.0)));
  CHECK(penalty_level(300, 500, PenaltyScheme::universal) == doctest::Approx(0.2036).epsilon(1e-3));
  CHECK(penalty_level(50, 1, PenaltyScheme::universal) == 0.0);
}

TEST_CASE("quantile penalty agrees with an independent secant solve") {
  // L = Phi^-1(1 - k/m) with k = L^4 + 2L^2, lambda0 = sqrt(2/n) L.
  const boost::math::normal nd;
  for (int m : {50, 500, 5000}) {
    auto f = [&](double l) {
      const double k = std::pow(l, 4) + 2.0 * l * l;
      return l - boost::math::quantile(nd, 1.0 - std::min(k / m, 0.99));
    };
    double a = 0.5, b = 2.5;
    for (int it = 0; it < 200 && std::abs(b - a) > 1e-15; ++it) {
      const double fa = f(a), fb = f(b);
      if (fb == fa) break;
      const double c = b - fb * (b - a) / (fb - fa);
      a = b;
      b = c;
    }
    CHECK(std::abs(f(b)) < 1e-10);
    CHECK(penalty_level(300, m, PenaltyScheme::quantile) == doctest::Approx(std::sqrt(2.0 / 300) * b).epsilon(1e-9));
  }
  CHECK(penalty_level(300, 500, PenaltyScheme::quantile) < penalty_level(300, 500, PenaltyScheme::universal));
}

TEST_CASE("scaled lasso on zero response is degenerate") {
  std::mt19937_64 rng(4);
  const MatrixXd x = testutil::center(gaussian(20, 5, rng));
  const ScaledLassoFit fit = scaled_lasso(x, VectorXd::Zero(20), 0.3);
  CHECK(fit.degenerate);
  CHECK(fit.coef.cwiseAbs().maxCoeff() == 0.0);
  CHECK(fit.sigma_hat == sigma_floor(VectorXd::Zero(20)));
}

TEST_CASE("scaled lasso with lambda0 = 0 is OLS") {
  std::mt19937_64 rng(5);
  const MatrixXd x = testutil::center(gaussian(50, 4, rng));
  const VectorXd y = testutil::center(x * VectorXd{{1, 2, 0, -1}} + testutil::gaussian_vec(50, rng));
  const ScaledLassoFit fit = scaled_lasso(x, y, 0.0);
  const VectorXd ols = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  CHECK((fit.coef - ols).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(fit.sigma_hat == doctest::Approx(std::sqrt((y - x * ols).squaredNorm() / 50)).epsilon(1e-6));
}

TEST_CASE("scaled lasso matches a grid search on two coefficients") {
  std::mt19937_64 rng(6);
  const MatrixXd x = standardized(gaussian(50, 2, rng));
  const VectorXd y = testutil::center(x * VectorXd{{0.6, 0.1}} + testutil::gaussian_vec(50, rng));
  const double lambda0 = 0.2;
  const ScaledLassoFit fit = scaled_lasso(x, y, lambda0);
  const double got = scaled_lasso_objective(x, y, lambda0, fit.coef, fit.sigma_hat);
  // For fixed beta the optimal sigma is ||r|| / sqrt(n); profile it out and refine a grid on beta.
  auto profile = [&](double b1, double b2) {
    const VectorXd b{{b1, b2}};
    const double s = std::max((y - x * b).norm() / std::sqrt(50.0), 1e-12);
    return scaled_lasso_objective(x, y, lambda0, b, s);
  };
  double c1 = 0.0, c2 = 0.0, width = 2.0, best = profile(0, 0);
  for (int level = 0; level < 14; ++level) {
    double n1 = c1, n2 = c2;
    for (int i = -20; i <= 20; ++i)
      for (int j = -20; j <= 20; ++j) {
        const double v = profile(c1 + width * i / 20.0, c2 + width * j / 20.0);
        if (v < best) {
          best = v;
          n1 = c1 + width * i / 20.0;
          n2 = c2 + width * j / 20.0;
        }
      }
    c1 = n1;
    c2 = n2;
    width /= 4.0;
  }
  CHECK(std::abs(got - best) < 1e-6);
  CHECK(got <= best + 1e-9);
}

TEST_CASE("scaled lasso invariants") {
  std::mt19937_64 rng(7);
  const MatrixXd x = testutil::center(gaussian(100, 150, rng));
  VectorXd truth = VectorXd::Zero(150);
  truth.head(5).setConstant(1.0);
  const VectorXd y = testutil::center(x * truth + 2.0 * testutil::gaussian_vec(100, rng));
  const double lambda0 = penalty_level(100, 150, PenaltyScheme::quantile);
  const ScaledLassoFit fit = scaled_lasso(x, y, lambda0);
  CHECK(fit.converged);
  CHECK(fit.sigma_hat == doctest::Approx((y - x * fit.coef).norm() / 10.0).epsilon(1e-5));
  for (std::size_t k = 1; k < fit.objective_trace.size(); ++k)
    CHECK(fit.objective_trace[k] <= fit.objective_trace[k - 1] + 1e-10);

  // Scale equivariance in y.
  const ScaledLassoFit scaled = scaled_lasso(x, 3.0 * y, lambda0);
  CHECK((scaled.coef - 3.0 * fit.coef).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(scaled.sigma_hat == doctest::Approx(3.0 * fit.sigma_hat).epsilon(1e-5));
}

TEST_CASE("lasso input checks") {
  std::mt19937_64 rng(8);
  const MatrixXd x = gaussian(10, 3, rng);
  CHECK_THROWS_AS(lasso_cd(x, VectorXd::Zero(9), 0.1), DataError);
  CHECK_THROWS_AS(lasso_cd(x, VectorXd::Zero(10), -0.1), DataError);
}
