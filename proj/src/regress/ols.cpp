#include "coorddelay/regress/ols.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace coorddelay {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::OLS: return "OLS";
    case Method::QR: return "QR";
    case Method::QRLasso: return "QR-LASSO";
  }
  return "?";
}

double check_loss(const Eigen::VectorXd& residuals, double tau) {
  double total = 0.0;
  for (double r : residuals) total += r < 0 ? r * (tau - 1.0) : r * tau;
  return total;
}

void require_full_rank(const Eigen::MatrixXd& X, const std::vector<std::string>& names) {
  auto name = [&](Eigen::Index j) {
    auto u = static_cast<std::size_t>(j);
    return u < names.size() ? names[u] : "x" + std::to_string(j);
  };
  if (X.rows() < X.cols()) {
    throw RankDeficientError("design has fewer rows (" + std::to_string(X.rows()) + ") than columns (" +
                                 std::to_string(X.cols()) + ")",
                             {});
  }
  // Sequential Gram-Schmidt with one reorthogonalization pass; a column is
  // collinear when its remainder is negligible against its own norm.
  Eigen::MatrixXd Q(X.rows(), 0);
  std::vector<std::string> collinear;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    Eigen::VectorXd v = X.col(j);
    double norm0 = v.norm();
    for (int pass = 0; pass < 2 && Q.cols() > 0; ++pass) v -= Q * (Q.transpose() * v);
    double rem = v.norm();
    if (norm0 == 0.0 || rem <= 1e-9 * norm0) {
      collinear.push_back(name(j));
      continue;
    }
    Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
    Q.col(Q.cols() - 1) = v / rem;
  }
  if (!collinear.empty()) {
    std::string list;
    for (const auto& c : collinear) list += (list.empty() ? "" : ", ") + c;
    throw RankDeficientError("design is rank deficient; collinear columns: " + list, collinear);
  }
}

HcVariant parse_hc_variant(std::string_view s) {
  if (s == "HC0") return HcVariant::HC0;
  if (s == "HC1") return HcVariant::HC1;
  if (s == "HC2") return HcVariant::HC2;
  if (s == "HC3") return HcVariant::HC3;
  throw std::invalid_argument("unknown HC variant: " + std::string(s));
}

std::string_view to_string(HcVariant v) {
  switch (v) {
    case HcVariant::HC0: return "HC0";
    case HcVariant::HC1: return "HC1";
    case HcVariant::HC2: return "HC2";
    case HcVariant::HC3: return "HC3";
  }
  return "?";
}

FitResult ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<std::string>& names,
                  HcVariant variant) {
  if (X.rows() != y.size()) throw std::invalid_argument("ols_fit: X and y row counts differ");
  require_full_rank(X, names);

  FitResult fit;
  fit.method = Method::OLS;
  fit.column_names = names;
  fit.n = X.rows();
  fit.k = X.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  fit.coefficients = qr.solve(y);
  fit.residuals = y - X * fit.coefficients;
  // One refinement step drives X'e to rounding level.
  fit.coefficients += qr.solve(fit.residuals);
  fit.residuals = y - X * fit.coefficients;

  double rss = fit.residuals.squaredNorm();
  double tss = (y.array() - y.mean()).matrix().squaredNorm();
  fit.objective = rss;
  if (tss > 0) {
    double r2 = 1.0 - rss / tss;
    fit.r2 = r2;
    if (fit.n > fit.k) fit.adj_r2 = 1.0 - (1.0 - r2) * static_cast<double>(fit.n - 1) / static_cast<double>(fit.n - fit.k);
  }
  double nd = static_cast<double>(fit.n);
  fit.loglik_surrogate = rss > 0 ? -0.5 * nd * (std::log(2.0 * std::numbers::pi) + 1.0 + std::log(rss / nd))
                                 : std::numeric_limits<double>::infinity();
  fit.aic = rss > 0 ? ols_aic(rss, fit.n, fit.k) : -std::numeric_limits<double>::infinity();
  fit.covariance = hc_covariance(fit, X, variant);
  return fit;
}

Eigen::MatrixXd hc_covariance(const FitResult& fit, const Eigen::MatrixXd& X, HcVariant variant) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (fit.residuals.size() != n) throw std::invalid_argument("hc_covariance: residual length differs from X rows");
  Eigen::MatrixXd xtx_inv = (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  Eigen::VectorXd omega(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double e2 = fit.residuals(i) * fit.residuals(i);
    double h = X.row(i) * xtx_inv * X.row(i).transpose();
    switch (variant) {
      case HcVariant::HC0: omega(i) = e2; break;
      case HcVariant::HC1: omega(i) = e2; break;
      case HcVariant::HC2: omega(i) = h > 1.0 - 1e-10 ? 0.0 : e2 / (1.0 - h); break;
      case HcVariant::HC3: omega(i) = h > 1.0 - 1e-10 ? 0.0 : e2 / ((1.0 - h) * (1.0 - h)); break;
    }
  }
  Eigen::MatrixXd meat = X.transpose() * omega.asDiagonal() * X;
  Eigen::MatrixXd v = xtx_inv * meat * xtx_inv;
  Eigen::MatrixXd sym = 0.5 * (v + v.transpose());
  if (variant == HcVariant::HC1) sym *= static_cast<double>(n) / static_cast<double>(n - k);
  return sym;
}

double ols_aic(double rss, long n, long k) {
  double nd = static_cast<double>(n);
  return nd * std::log(rss / nd) + 2.0 * static_cast<double>(k) + nd * (std::log(2.0 * std::numbers::pi) + 1.0);
}

double qr_loglik(double loss, long n, double tau) {
  if (!(loss > 0)) throw std::domain_error("quantile fit has zero check loss; AIC undefined");
  double nd = static_cast<double>(n);
  return nd * std::log(tau * (1.0 - tau)) - nd - nd * std::log(loss / nd);
}

double qr_aic(double loss, long n, long k, double tau) {
  return -2.0 * qr_loglik(loss, n, tau) + 2.0 * static_cast<double>(k);
}

}  // namespace coorddelay
