#pragma once

// Reference methods: dense Cauchy sketch (l1), uniform row sampling, and
// one-pass minibatch SGD for plain logistic regression.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "obsketch/errors.hpp"
#include "obsketch/hash.hpp"
#include "obsketch/objectives.hpp"
#include "obsketch/solvers.hpp"

namespace obsketch {

enum class BaselineKind { cauchy, uniform, sgd };

struct SgdParams {
  double eta0 = 0.1;         // eta_t = eta0 / sqrt(t), t counts minibatches
  std::uint64_t batch = 32;
};

struct BaselineConfig {
  BaselineKind kind = BaselineKind::uniform;
  std::uint64_t rows_or_sample = 1;
  std::uint64_t seed = 0;
  SgdParams sgd;
};

struct WeightedRows {
  RowMatrix rows;
  Vector weights;
  std::vector<std::uint64_t> source;  // uniform sampling: picked row indices
};

// Entry (k, i) of the r x n Cauchy matrix: tan(pi (u - 1/2)) with u in (0, 1)
// a keyed hash of (seed, i, k), so entries do not depend on blocking.
inline double cauchy_entry(std::uint64_t seed, std::uint64_t row, std::uint64_t col) {
  const std::uint64_t h = keyed_hash(seed, col, row);
  const double u = (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
  return std::tan(std::numbers::pi * (u - 0.5));
}

// S X_aug for a dense r x n matrix S of i.i.d. standard Cauchy entries.
// Cost O(r n) to generate plus O(r n d) to apply.
inline WeightedRows cauchy_sketch(const RowMatrix& X_aug, std::uint64_t r, std::uint64_t seed) {
  detail::require(r >= 1, ErrorCategory::invalid_argument, "cauchy_sketch: r must be >= 1");
  const Eigen::Index n = X_aug.rows();
  const auto R = static_cast<Eigen::Index>(r);
  WeightedRows out;
  out.rows = RowMatrix::Zero(R, X_aug.cols());
  constexpr Eigen::Index kBlock = 512;
  Eigen::MatrixXd S(R, kBlock);
  for (Eigen::Index start = 0; start < n; start += kBlock) {
    const Eigen::Index len = std::min(kBlock, n - start);
    for (Eigen::Index i = 0; i < len; ++i) {
      for (Eigen::Index k = 0; k < R; ++k) {
        S(k, i) = cauchy_entry(seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(start + i));
      }
    }
    out.rows.noalias() += S.leftCols(len) * X_aug.middleRows(start, len);
  }
  out.weights = Vector::Ones(R);
  return out;
}

// m rows without replacement, each with weight n / m.
inline WeightedRows uniform_sample(const RowMatrix& X, std::uint64_t m, std::uint64_t seed) {
  const auto n = static_cast<std::uint64_t>(X.rows());
  detail::require(m >= 1, ErrorCategory::invalid_argument, "uniform_sample: m must be >= 1");
  detail::require(m <= n, ErrorCategory::invalid_argument, "uniform_sample: m exceeds n");
  std::vector<std::uint64_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::uint64_t{0});
  std::mt19937_64 rng(seed);
  for (std::uint64_t k = 0; k < m; ++k) {
    std::uniform_int_distribution<std::uint64_t> pick(k, n - 1);
    std::swap(idx[k], idx[pick(rng)]);
  }
  idx.resize(m);
  WeightedRows out;
  out.rows.resize(static_cast<Eigen::Index>(m), X.cols());
  for (std::uint64_t k = 0; k < m; ++k) out.rows.row(static_cast<Eigen::Index>(k)) = X.row(static_cast<Eigen::Index>(idx[k]));
  out.weights = Vector::Constant(static_cast<Eigen::Index>(m), static_cast<double>(n) / static_cast<double>(m));
  out.source = std::move(idx);
  return out;
}

// One epoch of minibatch SGD on plain logistic loss over folded rows, in a
// seeded shuffled order, starting at 0. Returns the final iterate with its
// full-data objective.
inline FitResult sgd_one_pass(const RowMatrix& X, const SgdParams& params, std::uint64_t seed) {
  detail::require(params.batch >= 1 && params.eta0 > 0.0, ErrorCategory::invalid_argument,
                  "sgd_one_pass: batch >= 1 and eta0 > 0 required");
  detail::require(X.allFinite(), ErrorCategory::non_finite, "sgd_one_pass: non-finite data");
  const auto n = static_cast<std::uint64_t>(X.rows());
  std::vector<std::uint64_t> order(n);
  std::iota(order.begin(), order.end(), std::uint64_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  Vector beta = Vector::Zero(X.cols());
  Vector grad(X.cols());
  std::uint64_t t = 0;
  for (std::uint64_t start = 0; start < n; start += params.batch) {
    const std::uint64_t end = std::min(n, start + params.batch);
    grad.setZero();
    for (std::uint64_t k = start; k < end; ++k) {
      const auto i = static_cast<Eigen::Index>(order[k]);
      const double z = X.row(i).dot(beta);
      grad += detail::sigmoid(z) * X.row(i).transpose();
    }
    ++t;
    const double eta = params.eta0 / std::sqrt(static_cast<double>(t));
    beta -= eta * grad / static_cast<double>(end - start);
  }
  FitResult res;
  res.objective = f_full(X * beta, Vector::Ones(X.rows()), 0.0, static_cast<double>(n));
  res.beta = std::move(beta);
  res.iterations = t;
  res.converged = true;
  res.restarts_used = 1;
  return res;
}

}  // namespace obsketch
