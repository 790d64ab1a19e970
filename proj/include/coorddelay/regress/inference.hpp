#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coorddelay/regress/fit_result.hpp"
#include "coorddelay/regress/quantreg.hpp"

namespace coorddelay {

using Fitter = std::function<Eigen::VectorXd(const Eigen::MatrixXd&, const Eigen::VectorXd&)>;

Fitter ols_fitter();
Fitter qr_fitter(double tau, const QrOptions& options = {});

inline constexpr int kDefaultBootstrapReps = 200;

// reps x k matrix of pairs-bootstrap coefficient replicates. Replicate b uses
// its own mt19937_64 stream derived from (seed, b); a rank-deficient resample
// is redrawn from the same stream at most `max_retries` times.
Eigen::MatrixXd bootstrap_coefficients(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Fitter& fit,
                                       int reps, std::uint64_t seed, int max_retries = 10);

Eigen::MatrixXd replicate_covariance(const Eigen::MatrixXd& replicates);

// Quantile-regression bootstrap covariance and standard errors; reps >= 50.
Eigen::MatrixXd bootstrap_covariance(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau, int reps,
                                     std::uint64_t seed, const QrOptions& options = {});
Eigen::VectorXd bootstrap_se(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau,
                             int reps = kDefaultBootstrapReps, std::uint64_t seed = 1, const QrOptions& options = {});

// Wald test of the coefficients `large` adds to `small` (whose columns must be
// a prefix of the large model's). Covariance of the added block comes from a
// pairs bootstrap of the large model; W / q is referred to F(q, n - k).
// `y` is the response the large model was fitted on.
TestResult nested_wald_test(const FitResult& small, const FitResult& large, const Eigen::MatrixXd& X_large,
                            const Eigen::VectorXd& y, int bootstrap_reps, std::uint64_t seed,
                            const QrOptions& options = {});

// Same test from precomputed bootstrap replicates of the large model
// (reps x k_large), so the replicates behind coefficient standard errors can
// be reused.
TestResult nested_wald_from_replicates(const FitResult& small, const FitResult& large,
                                       const Eigen::MatrixXd& replicates);

// Hall-Sheather bandwidth n^(-1/3) z_(1-a/2)^(2/3) [1.5 phi(z_t)^2 / (2 z_t^2 + 1)]^(1/3).
double hall_sheather_bandwidth(long n, double tau, double alpha = 0.05);

// Sparsity s(tau) = xbar'(beta(tau + h) - beta(tau - h)) / (2h).
double sparsity_difference_quotient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau,
                                    const QrOptions& options = {});

// Wald test that coefficient `index` is equal across the quantile fits, with
// the iid joint covariance (min(t_i, t_j) - t_i t_j) s_i s_j [(X'X)^-1]_cc,
// referred to chi-square(m - 1). Throws std::invalid_argument when fewer than
// two fits, duplicated quantiles, or tau +- h leaving (0, 1).
TestResult between_quantile_test(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const FitResult> fits,
                                 Eigen::Index index, const QrOptions& options = {});

// The same test with sparsities s_i (one per fit) supplied by the caller.
TestResult between_quantile_wald(const Eigen::MatrixXd& X, std::span<const FitResult> fits, Eigen::Index index,
                                 std::span<const double> sparsity);

// Two-sided t p-values from sqrt(diag(covariance)) with n - k degrees of
// freedom; NaN where the standard error is zero.
Eigen::VectorXd coefficient_p_values(const FitResult& fit);

}  // namespace coorddelay
