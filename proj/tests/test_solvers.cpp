#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "obsketch/obsketch.hpp"
#include "test_util.hpp"

using namespace obsketch;
using obsketch::test_support::category_of;

namespace {

// Minimum of sum_i w_i |A_i beta + a_i| over all vertices defined by d rows.
double vertex_oracle(const RowMatrix& A, const Vector& a, const Vector& w) {
  const Eigen::Index n = A.rows();
  const Eigen::Index d = A.cols();
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(static_cast<std::size_t>(n), 0);
  std::fill(pick.end() - d, pick.end(), 1);
  do {
    Eigen::MatrixXd M(d, d);
    Vector rhs(d);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!pick[static_cast<std::size_t>(i)]) continue;
      M.row(r) = A.row(i);
      rhs[r] = -a[i];
      ++r;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (lu.rank() < d) continue;
    const Vector beta = lu.solve(rhs);
    best = std::min(best, w.dot((A * beta + a).cwiseAbs()));
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

// Plain Newton on the lambda = 0 logistic objective.
Vector newton_oracle(const RowMatrix& X, const Vector& w) {
  Vector beta = Vector::Zero(X.cols());
  for (int it = 0; it < 100; ++it) {
    const Vector z = X * beta;
    Vector p(z.size());
    Vector c(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      p[i] = 1.0 / (1.0 + std::exp(-z[i]));
      c[i] = w[i] * p[i] * (1.0 - p[i]);
    }
    const Vector g = X.transpose() * w.cwiseProduct(p);
    const Eigen::MatrixXd H = X.transpose() * c.asDiagonal() * X;
    const Vector step = H.ldlt().solve(g);
    beta -= step;
    if (step.norm() < 1e-14) break;
  }
  return beta;
}

RowMatrix gaussian(Eigen::Index n, Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  RowMatrix X(n, d);
  for (Eigen::Index k = 0; k < X.size(); ++k) X.data()[k] = g(rng);
  return X;
}

}  // namespace

TEST(SolveL1, MatchesVertexEnumeration) {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> dn(1, 3);
  std::uniform_real_distribution<double> uw(0.5, 2.0);
  for (int rep = 0; rep < 60; ++rep) {
    const Eigen::Index d = dn(rng);
    const Eigen::Index n = d + 3 + rep % 7;
    const RowMatrix rows = gaussian(n, d + 1, rng);
    Vector w(n);
    for (auto& v : w) v = uw(rng);
    const FitResult fit = solve_l1(rows, w);
    const double oracle = vertex_oracle(rows.leftCols(d), rows.col(d), w);
    EXPECT_NEAR(fit.objective, oracle, 1e-4 * oracle) << "rep " << rep;
    Vector aug(d + 1);
    aug << fit.beta, 1.0;
    EXPECT_NEAR(l1_objective(rows, w, aug), fit.objective, 1e-12 * std::max(1.0, fit.objective));
  }
}

TEST(SolveL1, ScalarInstanceGivesMedian) {
  // Intercept-only model: the optimum is the sample median of y.
  const std::vector<double> y{3.0, -1.0, 7.5, 2.0, 10.0, 2.5, 0.0};
  RowMatrix rows(7, 2);
  for (Eigen::Index i = 0; i < 7; ++i) rows.row(i) << 1.0, -y[static_cast<std::size_t>(i)];
  const FitResult fit = solve_l1(rows, Vector::Ones(7));
  EXPECT_EQ(fit.beta[0], 2.5);
}

TEST(SolveL1, ExactFitHasZeroObjective) {
  const Dataset ds = gen_exact_l1(50, 3, 4);
  const FitResult fit = solve_l1(augment_l1(ds.rows, *ds.target).rows, Vector::Ones(50));
  EXPECT_LT(fit.objective, 1e-9);
}

TEST(SolveL1, Errors) {
  EXPECT_EQ(category_of([] { solve_l1(RowMatrix::Ones(4, 1), Vector::Ones(4)); }), ErrorCategory::invalid_argument);
  EXPECT_EQ(category_of([] { solve_l1(RowMatrix::Ones(4, 2), Vector::Ones(3)); }), ErrorCategory::dimension_mismatch);
  EXPECT_EQ(category_of([] { solve_l1(RowMatrix::Ones(4, 2), -Vector::Ones(4)); }), ErrorCategory::invalid_argument);
}

TEST(SolveLogistic, MatchesNewtonOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uw(0.5, 4.0);
  for (int rep = 0; rep < 10; ++rep) {
    RowMatrix X = gaussian(80, 4, rng);
    X.col(0) += Vector::Constant(80, -0.3);
    Vector w(80);
    for (auto& v : w) v = uw(rng);
    const FitResult fit = solve_logistic(X, w, 0.0);
    const Vector ref = newton_oracle(X, w);
    const LogisticObjective obj(X, w, 0.0, 80.0);
    EXPECT_TRUE(fit.converged);
    EXPECT_FALSE(fit.diverged);
    EXPECT_NEAR(fit.objective, obj.value(ref), 1e-10);
    EXPECT_LT((fit.beta - ref).norm(), 1e-5);
  }
}

TEST(SolveLogistic, NormalizerScalesObjectiveOnly) {
  std::mt19937_64 rng(12);
  const RowMatrix X = gaussian(60, 3, rng);
  const Vector w = Vector::Ones(60);
  LogisticOptions opt;
  opt.normalizer = 120.0;
  const FitResult a = solve_logistic(X, w, 0.0);
  const FitResult b = solve_logistic(X, w, 0.0, opt);
  EXPECT_NEAR(b.objective, a.objective / 2.0, 1e-10);
  EXPECT_LT((a.beta - b.beta).norm(), 1e-5);
}

TEST(SolveLogistic, SeparableDataIsFlaggedDiverged) {
  RowMatrix X(4, 2);
  X << -1, -0.5, -2, -1, -0.5, -3, -1, -1;
  const FitResult fit = solve_logistic(X, Vector::Ones(4), 0.0);
  EXPECT_TRUE(fit.diverged);
  EXPECT_FALSE(fit.converged);
}

TEST(SolveLogistic, RegularizedFitBeatsZeroAndPlainSolution) {
  std::mt19937_64 rng(13);
  const RowMatrix X = gaussian(100, 3, rng);
  const Vector w = Vector::Ones(100);
  for (double lambda : {0.1, 1.0}) {
    LogisticOptions opt;
    opt.seed = 5;
    const FitResult fit = solve_logistic(X, w, lambda, opt);
    const LogisticObjective obj(X, w, lambda, 100.0);
    const FitResult plain = solve_logistic(X, w, 0.0);
    EXPECT_LE(fit.objective, std::log(2.0) + 1e-12);
    EXPECT_LE(fit.objective, obj.value(plain.beta) + 1e-12);
    EXPECT_NEAR(fit.objective, obj.value(fit.beta), 1e-14);
    Vector g(3);
    obj.value_and_gradient(fit.beta, g);
    EXPECT_LT(g.lpNorm<Eigen::Infinity>(), 1e-6);
  }
}

TEST(SolveLogistic, Errors) {
  const RowMatrix X = RowMatrix::Ones(3, 2);
  EXPECT_EQ(category_of([&] { solve_logistic(X, Vector::Ones(2), 0.0); }), ErrorCategory::dimension_mismatch);
  RowMatrix bad = X;
  bad(0, 0) = INFINITY;
  EXPECT_EQ(category_of([&] { solve_logistic(bad, Vector::Ones(3), 0.0); }), ErrorCategory::non_finite);
}

TEST(ApproxRatio, Definition) {
  EXPECT_DOUBLE_EQ(approx_ratio(3.0, 2.0), 1.5);
  EXPECT_EQ(category_of([] { approx_ratio(1.0, 0.0); }), ErrorCategory::undefined_ratio);
}

TEST(Lbfgs, MinimisesQuadratic) {
  const Eigen::Vector3d target(1.0, -2.0, 0.5);
  const Eigen::Vector3d scale(1.0, 10.0, 100.0);
  auto f = [&](const Vector& x, Vector& g) {
    const Vector r = x - Vector(target);
    g = scale.cwiseProduct(r);
    return 0.5 * r.dot(g);
  };
  const FitResult r = lbfgs_minimize(f, Vector::Zero(3));
  EXPECT_TRUE(r.converged);
  EXPECT_LT((r.beta - Vector(target)).norm(), 1e-7);
}
