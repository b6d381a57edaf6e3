#pragma once

// Deterministic solvers for the sketch-and-solve step:
//   * L-BFGS with Armijo backtracking for the smooth logistic objectives,
//     multi-start for the non-convex variance-regularized case;
//   * smoothed IRLS with a vertex polish for weighted l1 regression.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "obsketch/errors.hpp"
#include "obsketch/objectives.hpp"

namespace obsketch {

struct FitResult {
  Vector beta;
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t iterations = 0;
  bool converged = false;
  std::uint64_t restarts_used = 0;
  bool diverged = false;      // separable data or objective unbounded below
  bool stalled = false;       // stopped because the objective stopped decreasing
  double grad_norm = std::numeric_limits<double>::quiet_NaN();  // infinity norm
  std::uint64_t ridge_events = 0;
  std::vector<double> history;  // objective after each iteration / stage
};

struct LbfgsOptions {
  int memory = 10;
  std::uint64_t max_iterations = 2000;
  double grad_tol = 1e-8;     // stop when |g|_inf <= grad_tol * max(1, |f|)
  double armijo = 1e-4;
  int max_backtracks = 60;
  int stall_iterations = 10;  // stop after this many steps without relative decrease 1e-15
};

// Objective callback: returns f(x) and writes the gradient into g.
using SmoothFunction = std::function<double(const Vector& x, Vector& g)>;

// Minimises f from x0. `may_stop(x)` can veto a gradient-based stop, which is
// how a diverging logistic fit keeps iterating instead of claiming
// convergence at a tiny gradient.
inline FitResult lbfgs_minimize(const SmoothFunction& f, Vector x0, const LbfgsOptions& opt = {},
                                const std::function<bool(const Vector&)>& may_stop = {}) {
  FitResult res;
  Vector x = std::move(x0);
  Vector g(x.size());
  double fx = f(x, g);
  std::deque<Vector> s_hist;
  std::deque<Vector> y_hist;
  std::deque<double> rho_hist;
  Vector x_new(x.size());
  Vector g_new(x.size());
  Vector dir(x.size());

  auto small_gradient = [&](double fv, const Vector& gv) {
    return gv.lpNorm<Eigen::Infinity>() <= opt.grad_tol * std::max(1.0, std::abs(fv));
  };

  std::uint64_t it = 0;
  int stall = 0;
  for (; it < opt.max_iterations; ++it) {
    if (!std::isfinite(fx)) {
      res.diverged = true;
      break;
    }
    if (small_gradient(fx, g) && (!may_stop || may_stop(x))) {
      res.converged = true;
      break;
    }
    // Two-loop recursion.
    dir = -g;
    const std::size_t m = s_hist.size();
    std::vector<double> alpha(m);
    for (std::size_t k = m; k-- > 0;) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(dir);
      dir -= alpha[k] * y_hist[k];
    }
    if (m > 0) dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t k = 0; k < m; ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(dir);
      dir += (alpha[k] - beta) * s_hist[k];
    }
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double step = (m == 0) ? std::min(1.0, 1.0 / std::max(g.lpNorm<Eigen::Infinity>(), 1e-300)) : 1.0;

    bool accepted = false;
    double f_new = fx;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      x_new = x + step * dir;
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + opt.armijo * step * slope) {
        accepted = true;
        break;
      }
      // Near the optimum the Armijo decrease drowns in rounding; accept any
      // non-increasing step that shrinks the gradient.
      if (std::isfinite(f_new) && f_new <= fx && g_new.squaredNorm() < g.squaredNorm()) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.stalled = true;
      break;
    }
    stall = fx - f_new > 1e-15 * std::max(1.0, std::abs(fx)) ? 0 : stall + 1;

    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm() && sy > 0.0) {
      if (static_cast<int>(s_hist.size()) == opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
    }
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    res.history.push_back(fx);
    if (stall >= opt.stall_iterations) {
      res.stalled = true;
      ++it;
      break;
    }
  }
  if (!res.converged && !res.diverged && small_gradient(fx, g) && (!may_stop || may_stop(x))) {
    res.converged = true;
  }
  res.iterations = it;
  res.beta = std::move(x);
  res.objective = fx;
  res.grad_norm = g.lpNorm<Eigen::Infinity>();
  return res;
}

// ---------------------------------------------------------------------------
// Logistic regression

struct LogisticOptions {
  double normalizer = 0.0;  // 0 selects the row count
  std::uint64_t seed = 0;
  std::uint64_t restarts = 5;  // lambda > 0 only
  LbfgsOptions lbfgs;
  std::optional<Vector> initial;
  // lambda = 0: quasi-Newton iterations before switching to damped Newton
  // on the exact Hessian (0 disables the switch).
  std::uint64_t newton_after = 300;
  std::uint64_t newton_iterations = 100;
};

// Damped Newton for the convex weighted logistic objective, used when
// quasi-Newton stalls on badly scaled data (entries spanning several orders
// of magnitude). Hessian: (1/n) X^T diag(w s (1 - s)) X.
inline FitResult newton_logistic(const LogisticObjective& obj, Vector x, std::uint64_t max_iterations,
                                 const LbfgsOptions& opt = {}) {
  detail::require(obj.lambda() == 0.0, ErrorCategory::invalid_argument, "newton_logistic: convex case only");
  const RowMatrix& X = obj.X();
  const Vector& w = obj.w();
  const Eigen::Index d = X.cols();
  FitResult res;
  Vector g(d);
  Vector g_new(d);
  double fx = obj.value_and_gradient(x, g);
  Vector curv(X.rows());
  std::uint64_t it = 0;
  int stall = 0;
  for (; it < max_iterations; ++it) {
    if (!std::isfinite(fx)) {
      res.diverged = true;
      break;
    }
    if (g.lpNorm<Eigen::Infinity>() <= opt.grad_tol * std::max(1.0, std::abs(fx)) && !obj.separates(x)) {
      res.converged = true;
      break;
    }
    const Vector z = X * x;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double sg = detail::sigmoid(z[i]);
      curv[i] = w[i] * sg * (1.0 - sg);
    }
    const RowMatrix A = curv.cwiseSqrt().asDiagonal() * X;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d, d);
    H.selfadjointView<Eigen::Lower>().rankUpdate(A.transpose(), 1.0 / obj.normalizer());
    H = H.selfadjointView<Eigen::Lower>();
    const double scale = std::max(H.diagonal().maxCoeff(), 1e-300);
    double tau = 1e-12 * scale;
    Vector dir;
    for (int k = 0; k < 40; ++k) {
      Eigen::LLT<Eigen::MatrixXd> llt(H + tau * Eigen::MatrixXd::Identity(d, d));
      if (llt.info() == Eigen::Success) {
        dir = -llt.solve(g);
        if (dir.allFinite() && g.dot(dir) < 0.0) break;
      }
      ++res.ridge_events;
      tau *= 100.0;
      dir.resize(0);
    }
    if (dir.size() == 0) dir = -g;
    const double slope = g.dot(dir);
    double step = 1.0;
    bool accepted = false;
    Vector x_new(d);
    double f_new = fx;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      x_new = x + step * dir;
      f_new = obj.value_and_gradient(x_new, g_new);
      if (std::isfinite(f_new) &&
          (f_new <= fx + opt.armijo * step * slope || (f_new <= fx && g_new.squaredNorm() < g.squaredNorm()))) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.stalled = true;
      break;
    }
    stall = fx - f_new > 1e-15 * std::max(1.0, std::abs(fx)) ? 0 : stall + 1;
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    res.history.push_back(fx);
    if (stall >= opt.stall_iterations) {
      res.stalled = true;
      ++it;
      break;
    }
  }
  if (!res.converged && !res.diverged && g.lpNorm<Eigen::Infinity>() <= opt.grad_tol * std::max(1.0, std::abs(fx)) &&
      !obj.separates(x)) {
    res.converged = true;
  }
  res.iterations = it;
  res.beta = std::move(x);
  res.objective = fx;
  res.grad_norm = g.lpNorm<Eigen::Infinity>();
  return res;
}

namespace detail {

inline FitResult run_logistic(const LogisticObjective& obj, const Vector& x0, const LogisticOptions& lopt) {
  const LbfgsOptions& opt = lopt.lbfgs;
  const bool convex = obj.lambda() == 0.0;
  auto fn = [&](const Vector& x, Vector& g) { return obj.value_and_gradient(x, g); };
  auto may_stop = [&](const Vector& x) { return !(convex && obj.separates(x)); };
  FitResult r;
  if (convex && lopt.newton_after > 0 && lopt.newton_after < opt.max_iterations) {
    LbfgsOptions first = opt;
    first.max_iterations = lopt.newton_after;
    r = lbfgs_minimize(fn, x0, first, may_stop);
    if (!r.converged && !r.diverged) {
      FitResult polish = newton_logistic(obj, r.beta, lopt.newton_iterations, opt);
      polish.iterations += r.iterations;
      polish.ridge_events += r.ridge_events;
      polish.history.insert(polish.history.begin(), r.history.begin(), r.history.end());
      r = std::move(polish);
    }
  } else {
    r = lbfgs_minimize(fn, x0, opt, may_stop);
  }
  if (convex && obj.separates(r.beta)) {
    r.diverged = true;
    r.converged = false;
  }
  if (!convex && r.objective < -1e12) r.diverged = true;
  r.objective = obj.value(r.beta);
  return r;
}

}  // namespace detail

// Weighted (variance-regularized) logistic regression on folded rows X.
inline FitResult solve_logistic(const RowMatrix& X, const Vector& w, double lambda,
                                const LogisticOptions& opts = {}) {
  detail::require(X.rows() == w.size(), ErrorCategory::dimension_mismatch, "solve_logistic: weight length mismatch");
  detail::require(X.allFinite() && w.allFinite(), ErrorCategory::non_finite, "solve_logistic: non-finite data");
  detail::require((w.array() > 0.0).all(), ErrorCategory::invalid_argument, "solve_logistic: weights must be positive");
  const double normalizer = opts.normalizer > 0.0 ? opts.normalizer : static_cast<double>(X.rows());
  const Eigen::Index d = X.cols();
  const Vector start = opts.initial.value_or(Vector::Zero(d));
  detail::require(start.size() == d, ErrorCategory::dimension_mismatch, "solve_logistic: initial beta has wrong size");

  const LogisticObjective plain(X, w, 0.0, normalizer);
  FitResult base = detail::run_logistic(plain, start, opts);
  base.restarts_used = 1;
  if (lambda == 0.0) return base;

  // Non-convex: multi-start from 0, the lambda = 0 fit, and random points in
  // unit balls around both.
  const LogisticObjective obj(X, w, lambda, normalizer);
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto random_ball = [&](const Vector& center) {
    Vector v(d);
    for (Eigen::Index j = 0; j < d; ++j) v[j] = gauss(rng);
    const double radius = std::pow(unif(rng), 1.0 / static_cast<double>(d));
    return Vector(center + radius * v / std::max(v.norm(), 1e-300));
  };
  const Vector anchor = base.diverged ? Vector(Vector::Zero(d)) : base.beta;
  const std::uint64_t R = std::max<std::uint64_t>(1, opts.restarts);
  FitResult best;
  std::uint64_t total_iters = base.iterations;
  for (std::uint64_t k = 0; k < R; ++k) {
    Vector x0;
    if (k == 0) x0 = start;
    else if (k == 1) x0 = anchor;
    else x0 = random_ball(k % 2 == 0 ? Vector(Vector::Zero(d)) : anchor);
    FitResult r = detail::run_logistic(obj, x0, opts);
    total_iters += r.iterations;
    const bool better = best.beta.size() == 0 || (r.objective < best.objective && !std::isnan(r.objective));
    if (better) best = std::move(r);
  }
  best.restarts_used = R;
  best.iterations = total_iters;
  return best;
}

// ---------------------------------------------------------------------------
// l1 regression

struct L1Options {
  int stages = 30;            // smoothing mu_k = mu_0 2^-k
  int inner_iterations = 5;
  double rel_tol = 1e-6;
  double ridge_scale = 1e-10;
  bool polish = true;
};

namespace detail {

// Solves (A^T diag(omega) A) beta = -A^T diag(omega) a, adding a ridge when
// the system is numerically rank deficient.
inline Vector weighted_normal_solve(const RowMatrix& A, const Vector& a, const Vector& omega,
                                    double ridge_scale, std::uint64_t& ridge_events) {
  const Eigen::Index d = A.cols();
  const RowMatrix WA = omega.asDiagonal() * A;
  Eigen::MatrixXd H = A.transpose() * WA;
  const Vector rhs = -(WA.transpose() * a);
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-13) return llt.solve(rhs);
  ++ridge_events;
  const double scale = std::max(H.diagonal().maxCoeff(), 1e-300);
  H.diagonal().array() += ridge_scale * scale * std::max<double>(1.0, static_cast<double>(d));
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  return ldlt.solve(rhs);
}

// Indices of d linearly independent rows, taken greedily in order of
// increasing |resid|; empty when A has rank < d.
inline std::vector<Eigen::Index> basis_from_residuals(const RowMatrix& A, const Vector& resid) {
  const Eigen::Index n = A.rows();
  const Eigen::Index d = A.cols();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return std::abs(resid[i]) < std::abs(resid[j]); });
  Eigen::MatrixXd basis(0, d);
  std::vector<Eigen::Index> picked;
  for (Eigen::Index idx : order) {
    if (A.row(idx).isZero(0.0)) continue;
    Eigen::MatrixXd trial(basis.rows() + 1, d);
    trial << basis, A.row(idx);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(trial);
    lu.setThreshold(1e-10);
    if (lu.rank() == trial.rows()) {
      basis = std::move(trial);
      picked.push_back(idx);
      if (basis.rows() == d) break;
    }
  }
  if (basis.rows() < d) picked.clear();
  return picked;
}

inline Vector vertex_of(const RowMatrix& A, const Vector& a, const std::vector<Eigen::Index>& rows) {
  const auto d = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd M(d, d);
  Vector rhs(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    M.row(k) = A.row(rows[static_cast<std::size_t>(k)]);
    rhs[k] = -a[rows[static_cast<std::size_t>(k)]];
  }
  return M.fullPivLu().solve(rhs);
}

// Moves beta to the vertex defined by the d rows with the smallest
// residuals that are linearly independent.
inline std::optional<Vector> vertex_from_residuals(const RowMatrix& A, const Vector& a, const Vector& resid) {
  const std::vector<Eigen::Index> rows = basis_from_residuals(A, resid);
  if (rows.empty()) return std::nullopt;
  return vertex_of(A, a, rows);
}

// Vertex-to-vertex descent. Releasing basis row k moves beta along the edge
// v = M^-1 e_k; the exact line minimum of sum w_i |r_i + t c_i| is a
// weighted median of the breakpoints -r_i / c_i, and the row attaining it
// enters the basis. Takes the best edge each round until none improves.
inline void edge_descent(const RowMatrix& A, const Vector& a, const Vector& w, Vector& beta, double& value,
                         std::uint64_t max_rounds) {
  std::vector<Eigen::Index> rows = basis_from_residuals(A, A * beta + a);
  if (rows.empty()) return;
  const Eigen::Index n = A.rows();
  const auto d = static_cast<Eigen::Index>(rows.size());
  beta = vertex_of(A, a, rows);
  value = w.dot((A * beta + a).cwiseAbs());
  std::vector<std::pair<double, Eigen::Index>> breaks;
  for (std::uint64_t round = 0; round < max_rounds; ++round) {
    Eigen::MatrixXd M(d, d);
    for (Eigen::Index k = 0; k < d; ++k) M.row(k) = A.row(rows[static_cast<std::size_t>(k)]);
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (!lu.isInvertible()) return;
    const Eigen::MatrixXd Minv = lu.inverse();
    const Eigen::MatrixXd C = A * Minv;
    const Vector r = A * beta + a;
    double best_value = value;
    Eigen::Index best_k = -1;
    Eigen::Index best_row = -1;
    double best_t = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      breaks.clear();
      double total = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double c = C(i, k);
        if (c == 0.0) continue;
        breaks.emplace_back(-r[i] / c, i);
        total += w[i] * std::abs(c);
      }
      if (breaks.empty()) continue;
      std::sort(breaks.begin(), breaks.end());
      double acc = 0.0;
      std::size_t m = 0;
      for (; m + 1 < breaks.size(); ++m) {
        acc += w[breaks[m].second] * std::abs(C(breaks[m].second, k));
        if (acc >= 0.5 * total) break;
      }
      const double t = breaks[m].first;
      if (t == 0.0 || !std::isfinite(t)) continue;
      const double v = w.dot((r + t * C.col(k)).cwiseAbs());
      if (v < best_value) {
        best_value = v;
        best_k = k;
        best_row = breaks[m].second;
        best_t = t;
      }
    }
    if (best_k < 0 || !(best_value < value - 1e-14 * std::max(1.0, value))) return;
    rows[static_cast<std::size_t>(best_k)] = best_row;
    beta += best_t * Minv.col(best_k);
    value = best_value;
  }
}

}  // namespace detail

// Minimises sum_i w_i |rows_i . (beta, 1)| over beta for augmented rows
// (x_i, -y_i).
inline FitResult solve_l1(const RowMatrix& rows, const Vector& w, const L1Options& opts = {}) {
  detail::require(rows.cols() >= 2, ErrorCategory::invalid_argument, "solve_l1: need at least one feature plus target");
  detail::require(rows.rows() == w.size(), ErrorCategory::dimension_mismatch, "solve_l1: weight length mismatch");
  detail::require(rows.allFinite() && w.allFinite(), ErrorCategory::non_finite, "solve_l1: non-finite data");
  detail::require((w.array() > 0.0).all(), ErrorCategory::invalid_argument, "solve_l1: weights must be positive");
  const Eigen::Index d = rows.cols() - 1;
  const RowMatrix A = rows.leftCols(d);
  const Vector a = rows.col(d);

  auto objective = [&](const Vector& beta) { return w.dot((A * beta + a).cwiseAbs()); };

  FitResult res;
  Vector beta = detail::weighted_normal_solve(A, a, w, opts.ridge_scale, res.ridge_events);
  double best_value = objective(beta);
  Vector best = beta;
  Vector resid = A * beta + a;
  const double mu0 = resid.cwiseAbs().mean();
  res.history.push_back(best_value);

  if (mu0 > 0.0) {
    Vector omega(A.rows());
    for (int k = 0; k < opts.stages; ++k) {
      const double mu = mu0 * std::ldexp(1.0, -k);
      double prev = std::numeric_limits<double>::infinity();
      for (int inner = 0; inner < opts.inner_iterations; ++inner) {
        resid = A * beta + a;
        omega = w.array() / (resid.array().square() + mu * mu).sqrt();
        beta = detail::weighted_normal_solve(A, a, omega, opts.ridge_scale, res.ridge_events);
        const double value = objective(beta);
        ++res.iterations;
        if (value < best_value) {
          best_value = value;
          best = beta;
        }
        if (std::abs(prev - value) <= 1e-12 * std::max(1.0, value)) break;
        prev = value;
      }
      res.history.push_back(best_value);
    }
  }

  if (opts.polish) {
    for (int round = 0; round < 3; ++round) {
      const auto vertex = detail::vertex_from_residuals(A, a, A * best + a);
      if (!vertex) break;
      const double value = objective(*vertex);
      if (!(value < best_value)) {
        if (value == best_value) best = *vertex;
        break;
      }
      best_value = value;
      best = *vertex;
    }
    Vector moved = best;
    double moved_value = best_value;
    detail::edge_descent(A, a, w, moved, moved_value, static_cast<std::uint64_t>(20 * A.cols() + 50));
    if (moved_value < best_value) {
      best = moved;
      best_value = objective(best);
    }
    res.history.push_back(best_value);
  }

  res.beta = best;
  res.objective = best_value;
  res.converged = true;
  if (res.history.size() >= 3) {
    const double before = res.history[res.history.size() - 3];
    res.converged = before - best_value <= opts.rel_tol * std::max(best_value, 1e-300) || best_value == 0.0;
  }
  res.restarts_used = 1;
  return res;
}

// ---------------------------------------------------------------------------
// Approximation ratio f(X beta_tilde) / f(X beta_star), both on full data.

inline constexpr double kSolverSlack = 1e-6;

inline double approx_ratio(double value_tilde, double value_star) {
  if (!(value_star != 0.0)) {
    detail::fail(ErrorCategory::undefined_ratio, "approx_ratio: optimal objective is zero");
  }
  return value_tilde / value_star;
}

// Full-data objective for the given spec (normalizer taken from X).
inline double full_objective(const RowMatrix& X, const ObjectiveSpec& spec, const Vector& beta) {
  const Vector ones = Vector::Ones(X.rows());
  if (spec.kind == ObjectiveKind::l1) {
    Vector aug(beta.size() + 1);
    aug << beta, 1.0;
    return l1_objective(X, ones, aug);
  }
  return f_full(X * beta, ones, spec.lambda, static_cast<double>(X.rows()));
}

inline double approx_ratio(const RowMatrix& X, const ObjectiveSpec& spec, const Vector& beta_tilde,
                           const Vector& beta_star) {
  return approx_ratio(full_objective(X, spec, beta_tilde), full_objective(X, spec, beta_star));
}

}  // namespace obsketch
