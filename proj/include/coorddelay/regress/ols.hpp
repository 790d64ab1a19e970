#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "coorddelay/regress/fit_result.hpp"

namespace coorddelay {

enum class HcVariant { HC0, HC1, HC2, HC3 };
HcVariant parse_hc_variant(std::string_view s);  // throws std::invalid_argument
std::string_view to_string(HcVariant v);

// Least squares on y (already log(y + 1) transformed by the caller). The
// covariance is the sandwich estimator of `variant`.
FitResult ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<std::string>& names = {},
                  HcVariant variant = HcVariant::HC3);

// (X'X)^-1 X' diag(w_i e_i^2) X (X'X)^-1. Rows with leverage 1 have an
// identically zero residual and contribute nothing under HC2/HC3.
Eigen::MatrixXd hc_covariance(const FitResult& fit, const Eigen::MatrixXd& X, HcVariant variant);

// n log(RSS/n) + 2k + n (log 2 pi + 1).
double ols_aic(double rss, long n, long k);

// Asymmetric-Laplace surrogate: l = n log(tau (1 - tau)) - n - n log(loss / n),
// AIC = -2 l + 2k. Zero loss throws std::domain_error.
double qr_loglik(double loss, long n, double tau);
double qr_aic(double loss, long n, long k, double tau);

}  // namespace coorddelay
