#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "coorddelay/regress/ols.hpp"
#include "test_support.hpp"

using namespace coorddelay;


TEST(Ols, HandExampleAllVariants) {
  std::vector<double> x{0, 1, 2, 3, 4}, y{1, 3, 2, 5, 4};
  Eigen::MatrixXd X(5, 2);
  Eigen::VectorXd Y(5);
  for (int i = 0; i < 5; ++i) {
    X(i, 0) = 1;
    X(i, 1) = x[i];
    Y(i) = y[i];
  }
  testsupport::SimpleRegressionOracle oracle(x, y);
  for (auto v : {HcVariant::HC0, HcVariant::HC1, HcVariant::HC2, HcVariant::HC3}) {
    auto fit = ols_fit(X, Y, {"(Intercept)", "x"}, v);
    EXPECT_NEAR(fit.coefficients(0), oracle.b0, 1e-12);
    EXPECT_NEAR(fit.coefficients(1), oracle.b1, 1e-12);
    auto expected = oracle.sandwich(x, static_cast<int>(v));
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) EXPECT_NEAR(fit.covariance(a, b), expected[a][b], 1e-12) << to_string(v);
  }
  auto hc0 = ols_fit(X, Y, {}, HcVariant::HC0).covariance;
  auto hc1 = ols_fit(X, Y, {}, HcVariant::HC1).covariance;
  EXPECT_TRUE(hc1 == hc0 * (5.0 / 3.0));
}

TEST(Ols, NormalEquationsOnRandomDesigns) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    auto X = testsupport::random_design(60, 6, rng);
    std::normal_distribution<double> noise;
    Eigen::VectorXd y(60);
    for (int i = 0; i < 60; ++i) y(i) = X.row(i).sum() + noise(rng);
    auto fit = ols_fit(X, y);
    Eigen::VectorXd oracle = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    EXPECT_LE((fit.coefficients - oracle).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((X.transpose() * fit.residuals).cwiseAbs().maxCoeff(), 1e-8);
    ASSERT_TRUE(fit.r2 && fit.adj_r2);
    EXPECT_LE(*fit.adj_r2, *fit.r2);
    EXPECT_NEAR(fit.objective, fit.residuals.squaredNorm(), 1e-9);
  }
}

TEST(Ols, NoiselessRecovery) {
  std::mt19937_64 rng(3);
  auto X = testsupport::random_design(30, 4, rng);
  Eigen::VectorXd beta(4);
  beta << 1.5, -2, 0.25, 3;
  Eigen::VectorXd y = X * beta;
  auto fit = ols_fit(X, y);
  EXPECT_LE((fit.coefficients - beta).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ols, RankDeficiencyNamesColumns) {
  std::mt19937_64 rng(5);
  auto X0 = testsupport::random_design(20, 3, rng);
  Eigen::MatrixXd X(20, 4);
  X << X0, X0.col(1) * 2.0 - X0.col(2);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(20);
  try {
    ols_fit(X, y, {"(Intercept)", "a", "b", "c"});
    FAIL() << "expected RankDeficientError";
  } catch (const RankDeficientError& e) {
    EXPECT_EQ(e.columns(), std::vector<std::string>{"c"});
  }
}

TEST(Ols, AicFormulaAndPenalty) {
  const double rss = 12.5;
  const long n = 40;
  EXPECT_NEAR(ols_aic(rss, n, 3), n * std::log(rss / n) + 6 + n * (std::log(2 * M_PI) + 1), 1e-12);
  EXPECT_NEAR(ols_aic(rss, n, 7) - ols_aic(rss, n, 3), 8.0, 1e-12);
}

TEST(Ols, HcVariantNames) {
  for (auto v : {HcVariant::HC0, HcVariant::HC1, HcVariant::HC2, HcVariant::HC3}) {
    EXPECT_EQ(parse_hc_variant(to_string(v)), v);
  }
  EXPECT_THROW(parse_hc_variant("HC4"), std::invalid_argument);
}

TEST(QrAic, SurrogateFormula) {
  const double loss = 7.25, tau = 0.3;
  const long n = 25;
  const double l = n * std::log(tau * (1 - tau)) - n - n * std::log(loss / n);
  EXPECT_NEAR(qr_loglik(loss, n, tau), l, 1e-12);
  EXPECT_NEAR(qr_aic(loss, n, 4, tau), -2 * l + 8, 1e-12);
  EXPECT_THROW(qr_loglik(0.0, n, tau), std::domain_error);
}
