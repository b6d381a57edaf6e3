#pragma once

// mu-complexity: sup over beta of sum_{z_i>0} |z_i|^p / sum_{z_i<0} |z_i|^p
// with z = X beta. The estimator searches directions and so only ever
// reports lower bounds on mu_1 and mu_2.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "obsketch/errors.hpp"
#include "obsketch/sketch.hpp"

namespace obsketch {

struct MuRatioParts {
  double positive = 0.0;
  double negative = 0.0;
};

inline MuRatioParts mu_ratio_parts(const RowMatrix& X, const Vector& beta, int p) {
  detail::require(p == 1 || p == 2, ErrorCategory::invalid_argument, "mu_ratio: p must be 1 or 2");
  detail::require(X.cols() == beta.size(), ErrorCategory::dimension_mismatch, "mu_ratio: beta/X shape mismatch");
  const Vector z = X * beta;
  MuRatioParts parts;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double v = p == 1 ? std::abs(z[i]) : z[i] * z[i];
    if (z[i] > 0.0) parts.positive += v;
    else if (z[i] < 0.0) parts.negative += v;
  }
  return parts;
}

// Ratio for one direction. A zero denominator means beta separates the data
// and is reported as an infinite_ratio error.
inline double mu_ratio(const RowMatrix& X, const Vector& beta, int p) {
  detail::require(!beta.isZero(0.0), ErrorCategory::invalid_argument, "mu_ratio: beta must be nonzero");
  const MuRatioParts parts = mu_ratio_parts(X, beta, p);
  if (parts.negative == 0.0) {
    detail::fail(ErrorCategory::infinite_ratio, "mu_ratio: no negative mass in direction beta (separable)");
  }
  return parts.positive / parts.negative;
}

struct MuEstimate {
  double mu1_lb = 0.0;
  double mu2_lb = 0.0;
  std::uint64_t directions_tried = 0;
  Vector best_direction;     // attains mu1_lb (or witnesses separability)
  Vector best_direction_mu2;
  bool separable = false;
};

namespace detail {

// max over {beta, -beta}; +inf when one orientation has no negative mass.
inline double oriented_ratio(const RowMatrix& X, const Vector& beta, int p, Vector& argmax) {
  const MuRatioParts parts = mu_ratio_parts(X, beta, p);
  const double up = parts.negative > 0.0 ? parts.positive / parts.negative
                                         : (parts.positive > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  const double down = parts.positive > 0.0 ? parts.negative / parts.positive
                                           : (parts.negative > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  argmax = up >= down ? beta : Vector(-beta);
  return std::max(up, down);
}

}  // namespace detail

// Searches coordinate directions +-e_j, then num_directions random unit
// directions, then refine_steps rounds of coordinate-wise local search
// around the incumbent. For d = 1 the two directions +-1 are exhaustive.
inline MuEstimate estimate_mu(const RowMatrix& X, std::uint64_t num_directions, std::uint64_t seed,
                              std::uint64_t refine_steps = 0) {
  detail::require(num_directions >= 1, ErrorCategory::invalid_argument, "estimate_mu: num_directions must be >= 1");
  const Eigen::Index d = X.cols();
  detail::require(d >= 1 && X.rows() >= 1, ErrorCategory::invalid_argument, "estimate_mu: empty data");
  MuEstimate est;
  est.best_direction = Vector::Zero(d);
  est.best_direction_mu2 = Vector::Zero(d);

  Vector arg(d);
  auto consider = [&](const Vector& beta) {
    ++est.directions_tried;
    const double r1 = detail::oriented_ratio(X, beta, 1, arg);
    if (r1 > est.mu1_lb || est.best_direction.isZero(0.0)) {
      est.mu1_lb = r1;
      est.best_direction = arg;
    }
    const double r2 = detail::oriented_ratio(X, beta, 2, arg);
    if (r2 > est.mu2_lb || est.best_direction_mu2.isZero(0.0)) {
      est.mu2_lb = r2;
      est.best_direction_mu2 = arg;
    }
  };

  for (Eigen::Index j = 0; j < d; ++j) consider(Vector::Unit(d, j));
  if (d > 1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::uint64_t k = 0; k < num_directions; ++k) {
      Vector v(d);
      for (Eigen::Index j = 0; j < d; ++j) v[j] = gauss(rng);
      const double nv = v.norm();
      if (nv == 0.0) continue;
      consider(v / nv);
    }
    double step = 0.5;
    for (std::uint64_t r = 0; r < refine_steps; ++r) {
      bool improved = false;
      for (Eigen::Index j = 0; j < d && std::isfinite(est.mu1_lb); ++j) {
        for (double sign : {1.0, -1.0}) {
          const double before = est.mu1_lb;
          Vector trial = est.best_direction;
          trial[j] += sign * step;
          if (trial.isZero(0.0)) continue;
          consider(trial / trial.norm());
          improved = improved || est.mu1_lb > before;
        }
      }
      if (!improved) step *= 0.5;
    }
  }
  est.separable = !std::isfinite(est.mu1_lb) || !std::isfinite(est.mu2_lb);
  return est;
}

}  // namespace obsketch
