#include "coorddelay/regress/quantreg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "coorddelay/regress/ols.hpp"

namespace coorddelay {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kBig = 1e20;

// LDLT of X' diag(d) X with a relative ridge when the factor is not positive.
class NormalSystem {
 public:
  void factor(const MatrixXd& X, const VectorXd& d) {
    m_ = X.transpose() * d.asDiagonal() * X;
    ldlt_.compute(m_);
    if (ldlt_.info() != Eigen::Success || !(ldlt_.vectorD().array() > 0.0).all()) {
      double ridge = 1e-12 * std::max(m_.diagonal().maxCoeff(), std::numeric_limits<double>::min());
      m_.diagonal().array() += ridge;
      ldlt_.compute(m_);
    }
  }
  VectorXd solve(const VectorXd& rhs) const { return ldlt_.solve(rhs); }

 private:
  MatrixXd m_;
  Eigen::LDLT<MatrixXd> ldlt_;
};

struct InteriorResult {
  VectorXd beta;
  int iterations = 0;
  double gap = 0.0;  // relative
  bool converged = false;
};

double max_step(const VectorXd& v, const VectorXd& dv) {
  double step = kBig;
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0) step = std::min(step, -v(i) / dv(i));
  }
  return step;
}

// Frisch-Newton on the dual LP: max y'a s.t. X'a = (1 - tau) X'1, 0 <= a <= 1.
// All tolerances are relative to the scale of y so the iterates are
// equivariant under exact rescaling of y.
InteriorResult interior_point(const MatrixXd& X, const VectorXd& y, double tau, const QrOptions& opt,
                              double loss_scale, double y_scale) {
  const Index n = X.rows();
  const double nudge = opt.gap_tolerance * y_scale;
  const double beta = opt.step_fraction;

  VectorXd b = (1.0 - tau) * X.colwise().sum().transpose();
  VectorXd c = -y;
  VectorXd x = VectorXd::Constant(n, 1.0 - tau);
  VectorXd d = VectorXd::Ones(n);

  NormalSystem ns;
  ns.factor(X, d);
  VectorXd yd = ns.solve(X.transpose() * c);
  VectorXd s = c - X * yd;
  VectorXd z(n), w(n);
  for (Index i = 0; i < n; ++i) {
    double extra = std::abs(s(i)) < nudge ? nudge : 0.0;
    z(i) = std::max(s(i), 0.0) + extra;
    w(i) = std::max(-s(i), 0.0) + extra;
  }
  s = VectorXd::Constant(n, tau);

  double gap = z.dot(x) + w.dot(s);
  const double target = opt.gap_tolerance * loss_scale;
  int it = 0;
  VectorXd dx(n), ds(n), dz(n), dw(n), dr(n), u(n), dy, rhs;
  while (gap > target && it < opt.max_iterations) {
    ++it;
    d = ((z.array() / x.array()) + (w.array() / s.array())).inverse().matrix();
    ds = z - w;
    dz = d.cwiseProduct(ds);
    dy = b - X.transpose() * x + X.transpose() * dz;
    rhs = dy;
    ns.factor(X, d);
    dy = ns.solve(dy);
    ds = X * dy - ds;

    dx = d.cwiseProduct(ds);
    ds = -dx;
    dz = -(z.array() * (dx.array() / x.array() + 1.0)).matrix();
    dw = -(w.array() * (ds.array() / s.array() + 1.0)).matrix();
    double deltap = std::min(beta * std::min(max_step(x, dx), max_step(s, ds)), 1.0);
    double deltad = std::min(beta * std::min(max_step(z, dz), max_step(w, dw)), 1.0);

    if (std::min(deltap, deltad) < 1.0) {
      double mu = z.dot(x) + w.dot(s);
      double g = mu + deltap * dx.dot(z) + deltad * dz.dot(x) + deltap * deltad * dx.dot(dz) + deltap * ds.dot(w) +
                 deltad * dw.dot(s) + deltap * deltad * ds.dot(dw);
      mu = mu * std::pow(g / mu, 3) / (2.0 * static_cast<double>(n));
      for (Index i = 0; i < n; ++i) {
        dr(i) = d(i) * (mu * (1.0 / s(i) - 1.0 / x(i)) + dx(i) * dz(i) / x(i) - ds(i) * dw(i) / s(i));
      }
      dy = ns.solve(rhs + X.transpose() * dr);
      u = X * dy;
      for (Index i = 0; i < n; ++i) {
        double dxdz = dx(i) * dz(i);
        double dsdw = ds(i) * dw(i);
        dx(i) = d(i) * (u(i) - z(i) + w(i)) - dr(i);
        ds(i) = -dx(i);
        dz(i) = -z(i) + (mu - z(i) * dx(i) - dxdz) / x(i);
        dw(i) = -w(i) + (mu - w(i) * ds(i) - dsdw) / s(i);
      }
      deltap = std::min(beta * std::min(max_step(x, dx), max_step(s, ds)), 1.0);
      deltad = std::min(beta * std::min(max_step(z, dz), max_step(w, dw)), 1.0);
    }
    x += deltap * dx;
    s += deltap * ds;
    yd += deltad * dy;
    z += deltad * dz;
    w += deltad * dw;
    gap = z.dot(x) + w.dot(s);
    if (!std::isfinite(gap)) break;
  }
  InteriorResult res;
  res.beta = -yd;
  res.iterations = it;
  res.gap = loss_scale > 0 ? gap / loss_scale : gap;
  res.converged = gap <= target;
  return res;
}

// Greedy choice of k linearly independent rows in order of increasing |r|.
std::vector<Index> crossover(const MatrixXd& X, const VectorXd& r) {
  const Index n = X.rows();
  const Index k = X.cols();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return std::abs(r(a)) < std::abs(r(b)); });
  MatrixXd Q(k, 0);
  std::vector<Index> basis;
  for (Index i : order) {
    if (static_cast<Index>(basis.size()) == k) break;
    VectorXd v = X.row(i).transpose();
    double norm0 = v.norm();
    if (norm0 == 0.0) continue;
    for (int pass = 0; pass < 2 && Q.cols() > 0; ++pass) v -= Q * (Q.transpose() * v);
    double rem = v.norm();
    if (rem <= 1e-9 * norm0) continue;
    Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
    Q.col(Q.cols() - 1) = v / rem;
    basis.push_back(i);
  }
  if (static_cast<Index>(basis.size()) < k) {
    throw RankDeficientError("no nonsingular basis: the design has rank below its column count", {});
  }
  return basis;
}

MatrixXd basis_rows(const MatrixXd& X, const std::vector<Index>& basis) {
  MatrixXd Xh(static_cast<Index>(basis.size()), X.cols());
  for (std::size_t j = 0; j < basis.size(); ++j) Xh.row(static_cast<Index>(j)) = X.row(basis[j]);
  return Xh;
}

// Simplex-type descent over bases. Every row outside the basis carries the
// sign of its active slack: psi = tau for +1, tau - 1 for -1. A zero residual
// keeps the sign it had when it left the basis, so a degenerate pivot is an
// exact simplex step and Bland's rule applies.
struct VertexResult {
  VectorXd beta;
  std::vector<Index> basis;
  int pivots = 0;
};

VertexResult vertex_pass(const MatrixXd& X, const VectorXd& y, double tau, std::vector<Index> basis, int max_pivots,
                         double gap) {
  const Index n = X.rows();
  const Index k = X.cols();
  const double snap = residual_zero_tolerance(y);
  std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
  for (Index i : basis) in_basis[static_cast<std::size_t>(i)] = 1;
  std::vector<signed char> side(static_cast<std::size_t>(n), 1);

  int pivots = 0;
  int degenerate = 0;
  bool bland = false;
  VectorXd yh(k), r(n), g(k), a(n);
  std::vector<std::tuple<double, double, Index>> breaks;
  while (true) {
    MatrixXd Xh = basis_rows(X, basis);
    Eigen::PartialPivLU<MatrixXd> lu(Xh);
    if (!(lu.rcond() > 1e-14)) throw RankDeficientError("singular basis in the vertex pass", {});
    for (Index j = 0; j < k; ++j) yh(j) = y(basis[static_cast<std::size_t>(j)]);
    VectorXd beta = lu.solve(yh);
    r = y - X * beta;
    g.setZero();
    for (Index i = 0; i < n; ++i) {
      auto u = static_cast<std::size_t>(i);
      if (in_basis[u]) {
        r(i) = 0.0;
        continue;
      }
      if (std::abs(r(i)) <= snap) {
        r(i) = 0.0;
      } else {
        side[u] = r(i) > 0 ? 1 : -1;
      }
      g += (side[u] > 0 ? tau : tau - 1.0) * X.row(i).transpose();
    }
    VectorXd v = lu.transpose().solve(g);
    const double dtol = 1e-9 * std::max(1.0, v.cwiseAbs().maxCoeff());

    // Directional derivative along s * Xh^-1 e_j: D(+) = 1 - tau - v_j, D(-) = tau + v_j.
    Index leave = -1;
    double sign = 0.0;
    double slope = 0.0;
    for (Index j = 0; j < k; ++j) {
      double dp = (1.0 - tau) - v(j);
      double dm = tau + v(j);
      for (auto [dval, sv] : {std::pair{dp, 1.0}, std::pair{dm, -1.0}}) {
        if (dval >= -dtol) continue;
        bool take = leave < 0;
        if (!take) {
          take = bland ? basis[static_cast<std::size_t>(j)] < basis[static_cast<std::size_t>(leave)] : dval < slope;
        }
        if (take) {
          leave = j;
          sign = sv;
          slope = dval;
        }
      }
    }
    if (leave < 0) return {beta, basis, pivots};

    VectorXd e = VectorXd::Zero(k);
    e(leave) = 1.0;
    VectorXd delta = sign * lu.solve(e);
    a = X * delta;
    const double dnorm = delta.cwiseAbs().maxCoeff();
    breaks.clear();
    for (Index i = 0; i < n; ++i) {
      auto u = static_cast<std::size_t>(i);
      if (in_basis[u]) continue;
      double ai = a(i);
      if (std::abs(ai) <= 1e-12 * dnorm * X.row(i).cwiseAbs().maxCoeff()) continue;
      if (r(i) == 0.0) {
        // The residual moves as -t a_i; crossing happens when it leaves its side.
        if ((side[u] > 0 && ai > 0) || (side[u] < 0 && ai < 0)) breaks.emplace_back(0.0, std::abs(ai), i);
      } else {
        double t = r(i) / ai;
        if (t > 0) breaks.emplace_back(t, std::abs(ai), i);
      }
    }
    std::sort(breaks.begin(), breaks.end(), [](const auto& p, const auto& q) {
      if (std::get<0>(p) != std::get<0>(q)) return std::get<0>(p) < std::get<0>(q);
      return std::get<2>(p) < std::get<2>(q);
    });
    Index enter = -1;
    double step = 0.0;
    for (const auto& [t, weight, i] : breaks) {
      slope += weight;
      // Under Bland's rule take the plain ratio test: the first breakpoint.
      if (slope >= 0.0 || bland) {
        enter = i;
        step = t;
        break;
      }
    }
    if (enter < 0) throw ConvergenceError("vertex pass found an unbounded descent direction", gap);

    if (step == 0.0 && ++degenerate > 50) bland = true;
    auto left_row = static_cast<std::size_t>(basis[static_cast<std::size_t>(leave)]);
    in_basis[left_row] = 0;
    // Moving along +delta drives the departing residual negative.
    side[left_row] = sign > 0 ? -1 : 1;
    in_basis[static_cast<std::size_t>(enter)] = 1;
    basis[static_cast<std::size_t>(leave)] = enter;
    if (++pivots > max_pivots) {
      throw ConvergenceError("quantile regression did not reach an optimal vertex within " +
                                 std::to_string(max_pivots) + " pivots (interior duality gap " +
                                 std::to_string(gap) + ")",
                             gap);
    }
  }
}

double median_abs_deviation_sum(const VectorXd& y) {
  std::vector<double> v(y.data(), y.data() + y.size());
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double med = *mid;
  double total = 0.0;
  for (double yi : y) total += std::abs(yi - med);
  return total;
}

}  // namespace

double residual_zero_tolerance(const Eigen::VectorXd& y) {
  return y.size() == 0 ? 0.0 : 1e-11 * y.cwiseAbs().maxCoeff();
}

std::vector<bool> intercept_columns(const Eigen::MatrixXd& X) {
  std::vector<bool> out(static_cast<std::size_t>(X.cols()), false);
  for (Index j = 0; j < X.cols(); ++j) out[static_cast<std::size_t>(j)] = X.rows() > 0 && (X.col(j).array() == 1.0).all();
  return out;
}

QrSolution solve_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau, const QrOptions& options) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0, 1)");
  if (X.rows() != y.size()) throw std::invalid_argument("quantile regression: X and y row counts differ");
  if (X.rows() < X.cols()) throw RankDeficientError("fewer observations than columns", {});
  if (!y.allFinite() || !X.allFinite()) throw std::invalid_argument("quantile regression: non-finite input");

  QrSolution sol;
  const double y_scale = y.cwiseAbs().maxCoeff();
  if (y_scale == 0.0) {
    // y = 0 is fitted exactly by beta = 0 at any basis.
    sol.beta = VectorXd::Zero(X.cols());
    sol.basis = crossover(X, y);
    sol.interior_converged = true;
    return sol;
  }
  double loss_scale = median_abs_deviation_sum(y);
  if (loss_scale == 0.0) loss_scale = y.cwiseAbs().sum();

  InteriorResult ip = interior_point(X, y, tau, options, loss_scale, y_scale);
  sol.iterations = ip.iterations;
  sol.duality_gap = ip.gap;
  sol.interior_converged = ip.converged;
  VectorXd start = ip.beta.allFinite() ? ip.beta : VectorXd::Zero(X.cols());
  std::vector<Index> basis = crossover(X, y - X * start);
  int cap = options.max_pivots > 0 ? options.max_pivots : static_cast<int>(20 * X.rows() + 1000);
  VertexResult vr = vertex_pass(X, y, tau, std::move(basis), cap, ip.gap);
  sol.beta = std::move(vr.beta);
  sol.basis = std::move(vr.basis);
  sol.pivots = vr.pivots;
  return sol;
}

namespace {

FitResult finish_fit(Method method, const MatrixXd& X, const VectorXd& y, double tau, const QrSolution& sol,
                     const std::vector<std::string>& names) {
  FitResult fit;
  fit.method = method;
  fit.tau = tau;
  fit.column_names = names;
  fit.n = X.rows();
  fit.k = X.cols();
  fit.coefficients = sol.beta;
  fit.residuals = y - X * sol.beta;
  const double snap = residual_zero_tolerance(y);
  for (Index i = 0; i < fit.residuals.size(); ++i) {
    if (std::abs(fit.residuals(i)) <= snap) fit.residuals(i) = 0.0;
  }
  fit.objective = check_loss(fit.residuals, tau);
  if (fit.objective > 0) {
    fit.loglik_surrogate = qr_loglik(fit.objective, fit.n, tau);
    fit.aic = qr_aic(fit.objective, fit.n, fit.k, tau);
  } else {
    fit.loglik_surrogate = std::numeric_limits<double>::quiet_NaN();
    fit.aic = std::numeric_limits<double>::quiet_NaN();
  }
  fit.covariance = MatrixXd::Zero(fit.k, fit.k);
  fit.iterations = sol.iterations;
  fit.pivots = sol.pivots;
  fit.duality_gap = sol.duality_gap;
  fit.interior_converged = sol.interior_converged;
  return fit;
}

}  // namespace

FitResult qr_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau, const std::vector<std::string>& names,
                 const QrOptions& options) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0, 1)");
  require_full_rank(X, names);
  QrSolution sol = solve_quantile(X, y, tau, options);
  FitResult fit = finish_fit(Method::QR, X, y, tau, sol, names);
  // Basis rows are interpolated exactly.
  for (Index i : sol.basis) fit.residuals(i) = 0.0;
  fit.objective = check_loss(fit.residuals, tau);
  return fit;
}

double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau, double lambda,
                       const Eigen::VectorXd& beta) {
  auto icpt = intercept_columns(X);
  double penalty = 0.0;
  for (Index j = 0; j < beta.size(); ++j) {
    if (!icpt[static_cast<std::size_t>(j)]) penalty += std::abs(beta(j));
  }
  return check_loss(y - X * beta, tau) + lambda * penalty;
}

FitResult qr_lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau, double lambda,
                       const std::vector<std::string>& names, const LassoOptions& options) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0, 1)");
  const Index n = X.rows();
  const Index k = X.cols();
  if (lambda == 0.0) {
    FitResult fit = qr_fit(X, y, tau, names, options.solver);
    fit.method = Method::QRLasso;
    fit.lambda = 0.0;
    return fit;
  }

  auto icpt = intercept_columns(X);
  VectorXd scale = VectorXd::Ones(k);
  if (options.standardize) {
    for (Index j = 0; j < k; ++j) {
      if (icpt[static_cast<std::size_t>(j)] || n < 2) continue;
      double mean = X.col(j).mean();
      double sd = std::sqrt((X.col(j).array() - mean).square().sum() / static_cast<double>(n - 1));
      if (sd > 0) scale(j) = sd;
    }
  }
  std::vector<Index> penalized;
  for (Index j = 0; j < k; ++j) {
    if (!icpt[static_cast<std::size_t>(j)]) penalized.push_back(j);
  }
  const Index m = static_cast<Index>(penalized.size());
  MatrixXd Xa = MatrixXd::Zero(n + 2 * m, k);
  Xa.topRows(n) = X * scale.cwiseInverse().asDiagonal();
  VectorXd ya = VectorXd::Zero(n + 2 * m);
  ya.head(n) = y;
  for (Index p = 0; p < m; ++p) {
    Xa(n + 2 * p, penalized[static_cast<std::size_t>(p)]) = lambda;
    Xa(n + 2 * p + 1, penalized[static_cast<std::size_t>(p)]) = -lambda;
  }
  QrSolution sol = solve_quantile(Xa, ya, tau, options.solver);
  VectorXd beta_std = sol.beta;
  sol.beta = beta_std.cwiseQuotient(scale);

  FitResult fit = finish_fit(Method::QRLasso, X, y, tau, sol, names);
  fit.lambda = lambda;
  double penalty = 0.0;
  for (Index j : penalized) penalty += std::abs(beta_std(j));
  fit.objective = check_loss(fit.residuals, tau) + lambda * penalty;
  return fit;
}

}  // namespace coorddelay
