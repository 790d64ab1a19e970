#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace coorddelay {

enum class Method { OLS, QR, QRLasso };
std::string_view to_string(Method m);

struct FitResult {
  Method method = Method::OLS;
  std::optional<double> tau;
  std::optional<double> lambda;
  std::vector<std::string> column_names;
  Eigen::VectorXd coefficients;  // intercept first when the design has one
  Eigen::VectorXd residuals;
  Eigen::MatrixXd covariance;    // k x k; QR fits carry bootstrap covariance once attached
  double objective = 0.0;        // RSS for OLS, check loss (+ penalty) for QR
  double loglik_surrogate = 0.0;
  double aic = 0.0;
  std::optional<double> r2;
  std::optional<double> adj_r2;
  long n = 0;
  long k = 0;
  // Solver diagnostics for QR fits.
  int iterations = 0;
  int pivots = 0;
  double duality_gap = 0.0;
  bool interior_converged = true;
};

struct TestResult {
  double statistic = 0.0;
  double df1 = 0.0;
  double df2 = 0.0;  // 0 for chi-square references
  int bootstrap_reps = 0;
  double p_value = 1.0;
  std::string description;
};

class RankDeficientError : public std::runtime_error {
 public:
  RankDeficientError(const std::string& what, std::vector<std::string> columns)
      : std::runtime_error(what), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double gap) : std::runtime_error(what), gap_(gap) {}
  double duality_gap() const { return gap_; }

 private:
  double gap_;
};

// Sum of rho_tau(r_i) with rho_tau(u) = u * (tau - 1{u < 0}).
double check_loss(const Eigen::VectorXd& residuals, double tau);

// Throws RankDeficientError naming the columns that are linear combinations
// of earlier ones. Names default to "x<j>".
void require_full_rank(const Eigen::MatrixXd& X, const std::vector<std::string>& names);

}  // namespace coorddelay
