#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "coorddelay/regress/ols.hpp"
#include "coorddelay/regress/quantreg.hpp"
#include "test_support.hpp"

using namespace coorddelay;

namespace {

Eigen::VectorXd heavy_tailed_response(const Eigen::MatrixXd& X, std::mt19937_64& rng) {
  std::student_t_distribution<double> t(3.0);
  Eigen::VectorXd y(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) y(i) = X.row(i).sum() + t(rng);
  return y;
}

}  // namespace

TEST(CheckLoss, Definition) {
  Eigen::VectorXd r(4);
  r << -2, -0.5, 0, 3;
  EXPECT_DOUBLE_EQ(check_loss(r, 0.25), 0.75 * 2.5 + 0.25 * 3);
}

TEST(SolveQuantile, MatchesSubsetEnumeration) {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> pick(0.05, 0.95);
  for (int rep = 0; rep < 60; ++rep) {
    const int n = 12 + rep % 5, k = 2 + rep % 3;
    auto X = testsupport::random_design(n, k, rng);
    auto y = heavy_tailed_response(X, rng);
    const double tau = pick(rng);
    auto sol = solve_quantile(X, y, tau);
    const double oracle = testsupport::enumeration_objective(X, y, tau);
    EXPECT_NEAR(check_loss(y - X * sol.beta, tau), oracle, 1e-8 * std::max(1.0, oracle)) << "rep " << rep;
    EXPECT_EQ(sol.basis.size(), std::size_t(k));
  }
}

TEST(SolveQuantile, SignCountCondition) {
  std::mt19937_64 rng(7);
  for (double tau : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    auto X = testsupport::random_design(200, 5, rng);
    auto y = heavy_tailed_response(X, rng);
    auto fit = qr_fit(X, y, tau);
    auto c = testsupport::sign_count(fit.residuals);
    EXPECT_LE(c.negative, 200 * tau + 1e-9);
    EXPECT_GE(c.nonpositive, 200 * tau - 1e-9);
    EXPECT_GE(c.nonpositive - c.negative, 5);  // k interpolated rows
  }
}

TEST(SolveQuantile, BeatsOlsOnCheckLoss) {
  std::mt19937_64 rng(19);
  auto X = testsupport::random_design(150, 4, rng);
  auto y = heavy_tailed_response(X, rng);
  for (double tau : {0.25, 0.5, 0.75}) {
    auto qr = qr_fit(X, y, tau);
    auto ols = ols_fit(X, y);
    EXPECT_LE(check_loss(qr.residuals, tau), check_loss(ols.residuals, tau) + 1e-9);
  }
}

TEST(SolveQuantile, MedianOfInterceptOnlyModel) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(7, 1);
  Eigen::VectorXd y(7);
  y << 9, 1, 4, 7, 3, 8, 2;
  EXPECT_NEAR(solve_quantile(X, y, 0.5).beta(0), 4.0, 1e-12);
  // Lower order statistic y_(ceil(n tau)).
  EXPECT_NEAR(solve_quantile(X, y, 0.3).beta(0), 3.0, 1e-12);
}

TEST(SolveQuantile, ScaleAndShiftEquivariance) {
  std::mt19937_64 rng(23);
  auto X = testsupport::random_design(80, 3, rng);
  auto y = heavy_tailed_response(X, rng);
  Eigen::VectorXd gamma(3);
  gamma << 0.5, -1, 2;
  const double tau = 0.4;
  auto base = solve_quantile(X, y, tau).beta;
  auto scaled = solve_quantile(X, 4.0 * y, tau).beta;
  EXPECT_LE((scaled - 4.0 * base).cwiseAbs().maxCoeff(), 1e-8);
  auto flipped = solve_quantile(X, -y, 1 - tau).beta;
  EXPECT_LE((flipped + base).cwiseAbs().maxCoeff(), 1e-8);
  auto shifted = solve_quantile(X, y + X * gamma, tau).beta;
  EXPECT_LE((shifted - base - gamma).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SolveQuantile, RejectsBadInput) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(5, 2);
  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(5, 0, 4);
  EXPECT_THROW(solve_quantile(X, y, 0.5), RankDeficientError);
  Eigen::MatrixXd ok = Eigen::MatrixXd::Ones(5, 1);
  EXPECT_THROW(solve_quantile(ok, y, 0.0), std::invalid_argument);
  EXPECT_THROW(solve_quantile(ok, y, 1.0), std::invalid_argument);
}

TEST(QrFit, ReportsAicAndNames) {
  std::mt19937_64 rng(31);
  auto X = testsupport::random_design(60, 3, rng);
  auto y = heavy_tailed_response(X, rng);
  auto fit = qr_fit(X, y, 0.5, {"(Intercept)", "a", "b"});
  EXPECT_EQ(fit.column_names, (std::vector<std::string>{"(Intercept)", "a", "b"}));
  EXPECT_EQ(fit.method, Method::QR);
  EXPECT_NEAR(fit.objective, check_loss(fit.residuals, 0.5), 1e-10);
  EXPECT_NEAR(fit.aic, qr_aic(fit.objective, 60, 3, 0.5), 1e-10);
}

TEST(QrLasso, ZeroPenaltyMatchesPlainFit) {
  std::mt19937_64 rng(41);
  auto X = testsupport::random_design(50, 4, rng);
  auto y = heavy_tailed_response(X, rng);
  auto plain = qr_fit(X, y, 0.5);
  auto lasso = qr_lasso_fit(X, y, 0.5, 0.0);
  EXPECT_NEAR(check_loss(y - X * lasso.coefficients, 0.5), plain.objective, 1e-8);
}

TEST(QrLasso, LargePenaltyLeavesIntercept) {
  std::mt19937_64 rng(43);
  auto X = testsupport::random_design(51, 4, rng);
  auto y = heavy_tailed_response(X, rng);
  for (double tau : {0.25, 0.5, 0.75}) {
    auto fit = qr_lasso_fit(X, y, tau, 1e4);
    EXPECT_LE(fit.coefficients.tail(3).cwiseAbs().maxCoeff(), 1e-9);
    std::vector<double> sorted(y.data(), y.data() + y.size());
    std::sort(sorted.begin(), sorted.end());
    const auto idx = static_cast<std::size_t>(std::ceil(51 * tau)) - 1;
    EXPECT_NEAR(fit.coefficients(0), sorted[idx], 1e-9) << tau;
  }
}

TEST(QrLasso, ObjectiveIsMinimalAndMonotone) {
  std::mt19937_64 rng(47);
  auto X = testsupport::random_design(70, 5, rng);
  auto y = heavy_tailed_response(X, rng);
  const auto unpenalized = qr_fit(X, y, 0.5).coefficients;
  double previous_norm = INFINITY;
  for (double lambda : {0.5, 2.0, 8.0, 32.0}) {
    auto fit = qr_lasso_fit(X, y, 0.5, lambda);
    const double obj = lasso_objective(X, y, 0.5, lambda, fit.coefficients);
    EXPECT_NEAR(fit.objective, obj, 1e-8);
    EXPECT_LE(obj, lasso_objective(X, y, 0.5, lambda, unpenalized) + 1e-8);
    const double norm = fit.coefficients.tail(4).lpNorm<1>();
    EXPECT_LE(norm, previous_norm + 1e-9);
    previous_norm = norm;
  }
}

TEST(QrLasso, InterceptDetection) {
  Eigen::MatrixXd X(3, 3);
  X << 1, 1, 0, 1, 2, 1, 1, 3, 1;
  EXPECT_EQ(intercept_columns(X), (std::vector<bool>{true, false, false}));
}
