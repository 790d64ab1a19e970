#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coorddelay/regress/fit_result.hpp"

namespace coorddelay {

struct QrOptions {
  double gap_tolerance = 1e-7;  // relative duality gap of the interior-point phase
  int max_iterations = 100;
  double step_fraction = 0.99995;
  int max_pivots = 0;  // vertex pass cap; 0 selects 20 n + 1000
};

struct QrSolution {
  Eigen::VectorXd beta;
  std::vector<Eigen::Index> basis;  // k interpolated rows at the optimal vertex
  int iterations = 0;
  int pivots = 0;
  double duality_gap = 0.0;
  bool interior_converged = false;
};

// Minimizes sum rho_tau(y_i - x_i' beta). A Frisch-Newton interior-point
// phase (Mehrotra predictor-corrector) is followed by crossover to a basis of
// k interpolated rows and a simplex-type vertex pass that stops at a basis
// whose duals lie in [tau - 1, tau]. The vertex pass also covers interior
// non-convergence. Throws ConvergenceError when the pivot cap is exhausted
// and RankDeficientError when no nonsingular basis exists.
QrSolution solve_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau,
                          const QrOptions& options = {});

// Residuals within this tolerance of zero are reported as exactly zero.
double residual_zero_tolerance(const Eigen::VectorXd& y);

FitResult qr_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau,
                 const std::vector<std::string>& names = {}, const QrOptions& options = {});

struct LassoOptions {
  QrOptions solver;
  bool standardize = false;  // scale penalized columns to unit sd before fitting
};

// Minimizes sum rho_tau(r_i) + lambda * sum_j |beta_j| over the columns that
// are not identically one (the intercept stays unpenalized). Solved as an
// augmented quantile regression with pseudo-rows (+-lambda e_j, 0).
FitResult qr_lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau, double lambda,
                       const std::vector<std::string>& names = {}, const LassoOptions& options = {});

// Penalized objective of `beta` under the qr_lasso_fit convention.
double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau, double lambda,
                       const Eigen::VectorXd& beta);

// Columns whose entries are all exactly 1.
std::vector<bool> intercept_columns(const Eigen::MatrixXd& X);

}  // namespace coorddelay
