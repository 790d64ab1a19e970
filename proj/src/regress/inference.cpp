#include "coorddelay/regress/inference.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "coorddelay/regress/ols.hpp"
#include "coorddelay/util/parallel.hpp"

namespace coorddelay {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Fitter ols_fitter() {
  return [](const MatrixXd& X, const VectorXd& y) -> VectorXd {
    require_full_rank(X, {});
    return X.colPivHouseholderQr().solve(y);
  };
}

Fitter qr_fitter(double tau, const QrOptions& options) {
  return [tau, options](const MatrixXd& X, const VectorXd& y) -> VectorXd {
    require_full_rank(X, {});
    return solve_quantile(X, y, tau, options).beta;
  };
}

MatrixXd bootstrap_coefficients(const MatrixXd& X, const VectorXd& y, const Fitter& fit, int reps,
                                std::uint64_t seed, int max_retries) {
  if (reps < 1) throw std::invalid_argument("bootstrap needs at least one replicate");
  const Index n = X.rows();
  const Index k = X.cols();
  MatrixXd out(reps, k);
  parallel_for(static_cast<std::size_t>(reps), [&](std::size_t b) {
    std::mt19937_64 rng(stream_seed(seed, b));
    std::uniform_int_distribution<Index> pick(0, n - 1);
    MatrixXd Xb(n, k);
    VectorXd yb(n);
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
      for (Index i = 0; i < n; ++i) {
        Index src = pick(rng);
        Xb.row(i) = X.row(src);
        yb(i) = y(src);
      }
      try {
        out.row(static_cast<Index>(b)) = fit(Xb, yb).transpose();
        return;
      } catch (const RankDeficientError&) {
      }
    }
    throw std::runtime_error("bootstrap replicate " + std::to_string(b) + " stayed rank deficient after " +
                             std::to_string(max_retries) + " redraws");
  });
  return out;
}

MatrixXd replicate_covariance(const MatrixXd& replicates) {
  const Index b = replicates.rows();
  if (b < 2) throw std::invalid_argument("covariance needs at least two replicates");
  MatrixXd centered = replicates.rowwise() - replicates.colwise().mean();
  MatrixXd cov = centered.transpose() * centered / static_cast<double>(b - 1);
  return 0.5 * (cov + cov.transpose());
}

MatrixXd bootstrap_covariance(const MatrixXd& X, const VectorXd& y, double tau, int reps, std::uint64_t seed,
                              const QrOptions& options) {
  if (reps < 50) throw std::invalid_argument("bootstrap standard errors need reps >= 50");
  return replicate_covariance(bootstrap_coefficients(X, y, qr_fitter(tau, options), reps, seed));
}

VectorXd bootstrap_se(const MatrixXd& X, const VectorXd& y, double tau, int reps, std::uint64_t seed,
                      const QrOptions& options) {
  return bootstrap_covariance(X, y, tau, reps, seed, options).diagonal().cwiseSqrt();
}

namespace {

void check_nested(const FitResult& small, const FitResult& large) {
  if (small.method != large.method) throw std::invalid_argument("nested test needs fits of the same method");
  if (large.method == Method::QRLasso) throw std::invalid_argument("nested test is not defined for penalized fits");
  if (small.k >= large.k) throw std::invalid_argument("nested test needs a strictly larger model");
  if (small.n != large.n) throw std::invalid_argument("nested test needs fits on the same observations");
  if (small.tau != large.tau) throw std::invalid_argument("nested test needs fits at the same quantile");
  if (!small.column_names.empty() && !large.column_names.empty()) {
    for (std::size_t j = 0; j < small.column_names.size(); ++j) {
      if (small.column_names[j] != large.column_names[j]) {
        throw std::invalid_argument("nested test: small model columns are not a prefix of the large model");
      }
    }
  }
}

}  // namespace

TestResult nested_wald_from_replicates(const FitResult& small, const FitResult& large, const MatrixXd& replicates) {
  check_nested(small, large);
  if (replicates.cols() != large.k) throw std::invalid_argument("replicate columns differ from the large model");
  const Index q = large.k - small.k;
  MatrixXd v = replicate_covariance(replicates.rightCols(q));
  VectorXd b = large.coefficients.tail(q);
  Eigen::FullPivLU<MatrixXd> lu(v);
  lu.setThreshold(1e-12);
  if (lu.rank() < q) throw std::runtime_error("bootstrap covariance of the added coefficients is singular");

  TestResult t;
  t.statistic = b.dot(lu.solve(b)) / static_cast<double>(q);
  t.df1 = static_cast<double>(q);
  t.df2 = static_cast<double>(large.n - large.k);
  t.bootstrap_reps = static_cast<int>(replicates.rows());
  if (t.df2 < 1) throw std::invalid_argument("nested test needs n > k");
  boost::math::fisher_f dist(t.df1, t.df2);
  t.p_value = t.statistic > 0 ? boost::math::cdf(boost::math::complement(dist, t.statistic)) : 1.0;
  t.description = "Wald F on " + std::to_string(q) + " added coefficients, pairs bootstrap covariance";
  return t;
}

TestResult nested_wald_test(const FitResult& small, const FitResult& large, const MatrixXd& X_large,
                            const VectorXd& y, int bootstrap_reps, std::uint64_t seed, const QrOptions& options) {
  check_nested(small, large);
  if (X_large.cols() != large.k || X_large.rows() != large.n || y.size() != large.n) {
    throw std::invalid_argument("nested test: design does not match the large fit");
  }
  Fitter fitter = large.method == Method::OLS ? ols_fitter() : qr_fitter(*large.tau, options);
  return nested_wald_from_replicates(small, large,
                                     bootstrap_coefficients(X_large, y, fitter, bootstrap_reps, seed));
}

double hall_sheather_bandwidth(long n, double tau, double alpha) {
  boost::math::normal std_normal;
  double z_a = boost::math::quantile(std_normal, 1.0 - alpha / 2.0);
  double z_t = boost::math::quantile(std_normal, tau);
  double phi = boost::math::pdf(std_normal, z_t);
  return std::pow(static_cast<double>(n), -1.0 / 3.0) * std::pow(z_a, 2.0 / 3.0) *
         std::pow(1.5 * phi * phi / (2.0 * z_t * z_t + 1.0), 1.0 / 3.0);
}

double sparsity_difference_quotient(const MatrixXd& X, const VectorXd& y, double tau, const QrOptions& options) {
  double h = hall_sheather_bandwidth(X.rows(), tau);
  if (tau - h <= 0.0 || tau + h >= 1.0) {
    throw std::invalid_argument("quantile " + std::to_string(tau) + " is too close to the boundary for bandwidth " +
                                std::to_string(h));
  }
  VectorXd xbar = X.colwise().mean().transpose();
  VectorXd hi = solve_quantile(X, y, tau + h, options).beta;
  VectorXd lo = solve_quantile(X, y, tau - h, options).beta;
  double s = xbar.dot(hi - lo) / (2.0 * h);
  if (!(s > 0.0)) throw std::runtime_error("non-positive sparsity estimate at tau " + std::to_string(tau));
  return s;
}

namespace {

void check_quantile_fits(const MatrixXd& X, std::span<const FitResult> fits, Index index) {
  if (fits.size() < 2) throw std::invalid_argument("between-quantile test needs at least two fits");
  if (index < 0 || index >= X.cols()) throw std::invalid_argument("coefficient index out of range");
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    if (!f.tau || f.k != X.cols() || f.n != X.rows()) {
      throw std::invalid_argument("between-quantile test: fits must be quantile fits on the shared design");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (*fits[j].tau == *f.tau) throw std::invalid_argument("duplicated quantile");
    }
  }
}

}  // namespace

TestResult between_quantile_wald(const MatrixXd& X, std::span<const FitResult> fits, Index index,
                                 std::span<const double> sparsity) {
  check_quantile_fits(X, fits, index);
  const auto m = static_cast<Index>(fits.size());
  if (static_cast<Index>(sparsity.size()) != m) throw std::invalid_argument("one sparsity per fit required");
  VectorXd taus(m), beta(m);
  for (Index i = 0; i < m; ++i) {
    taus(i) = *fits[static_cast<std::size_t>(i)].tau;
    beta(i) = fits[static_cast<std::size_t>(i)].coefficients(index);
  }
  const Index k = X.cols();
  MatrixXd xtx_inv = (X.transpose() * X).ldlt().solve(MatrixXd::Identity(k, k));
  double q_cc = xtx_inv(index, index);
  MatrixXd omega(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) {
      omega(i, j) = (std::min(taus(i), taus(j)) - taus(i) * taus(j)) * sparsity[static_cast<std::size_t>(i)] *
                    sparsity[static_cast<std::size_t>(j)] * q_cc;
    }
  }
  MatrixXd D = MatrixXd::Zero(m - 1, m);
  for (Index i = 0; i + 1 < m; ++i) {
    D(i, i) = 1.0;
    D(i, i + 1) = -1.0;
  }
  VectorXd d = D * beta;
  MatrixXd v = D * omega * D.transpose();

  TestResult t;
  t.statistic = d.dot(v.ldlt().solve(d));
  t.df1 = static_cast<double>(m - 1);
  boost::math::chi_squared dist(t.df1);
  t.p_value = t.statistic > 0 ? boost::math::cdf(boost::math::complement(dist, t.statistic)) : 1.0;
  t.description = "Wald chi-square for equal coefficient across " + std::to_string(m) + " quantiles";
  return t;
}

TestResult between_quantile_test(const MatrixXd& X, const VectorXd& y, std::span<const FitResult> fits, Index index,
                                 const QrOptions& options) {
  check_quantile_fits(X, fits, index);
  std::vector<double> s;
  for (const auto& f : fits) s.push_back(sparsity_difference_quotient(X, y, *f.tau, options));
  return between_quantile_wald(X, fits, index, s);
}

VectorXd coefficient_p_values(const FitResult& fit) {
  VectorXd p(fit.k);
  double df = static_cast<double>(fit.n - fit.k);
  for (Index j = 0; j < fit.k; ++j) {
    double se = fit.covariance.size() ? std::sqrt(std::max(0.0, fit.covariance(j, j))) : 0.0;
    if (!(se > 0.0) || df < 1) {
      p(j) = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    boost::math::students_t dist(df);
    p(j) = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(fit.coefficients(j)) / se));
  }
  return p;
}

}  // namespace coorddelay
