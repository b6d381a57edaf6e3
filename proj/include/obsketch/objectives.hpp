#pragma once

// Logistic, variance-regularized logistic and l1 objectives, evaluated on raw
// data (w = 1, normalizer = n) or on a weighted sketch (normalizer = original n).
//
//   f_w(z) = f1 + f2 - f3
//   f1 = (1/n) sum w_i l(z_i)
//   f2 = (lambda / 2n) sum w_i l(z_i)^2
//   f3 = (lambda / 2) f1^2
//
// with l(r) = ln(1 + e^r) and z = X beta on label-folded rows.

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "obsketch/errors.hpp"
#include "obsketch/sketch.hpp"

namespace obsketch {

enum class ObjectiveKind { logistic, logistic_var_reg, l1 };

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::logistic;
  double lambda = 0.0;
  double normalizer = 1.0;
};

inline void validate(const ObjectiveSpec& spec) {
  detail::require(spec.normalizer > 0.0, ErrorCategory::invalid_argument, "normalizer must be positive");
  detail::require(std::isfinite(spec.lambda) && spec.lambda >= 0.0, ErrorCategory::invalid_argument,
                  "lambda must be non-negative");
}

// Below this magnitude l(-|t|) is under double resolution; treated as 0.
inline constexpr double kLossSaturation = 745.0;

namespace detail {

inline double logit_unchecked(double r) {
  if (r > 0.0) return r > kLossSaturation ? r : r + std::log1p(std::exp(-r));
  return r < -kLossSaturation ? 0.0 : std::log1p(std::exp(r));
}

inline double sigmoid(double r) {
  if (r >= 0.0) return 1.0 / (1.0 + std::exp(-r));
  const double e = std::exp(r);
  return e / (1.0 + e);
}

inline void require_same_length(Eigen::Index a, Eigen::Index b, const char* what) {
  require(a == b, ErrorCategory::dimension_mismatch, std::string(what) + ": length mismatch");
}

}  // namespace detail

inline double logit_loss(double r) {
  detail::require(std::isfinite(r), ErrorCategory::non_finite, "logit_loss: non-finite input");
  return detail::logit_unchecked(r);
}

inline double f1(const Eigen::Ref<const Vector>& z, const Eigen::Ref<const Vector>& w, double normalizer) {
  detail::require_same_length(z.size(), w.size(), "f1");
  detail::require(normalizer > 0.0, ErrorCategory::invalid_argument, "f1: normalizer must be positive");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) acc += w[i] * detail::logit_unchecked(z[i]);
  return acc / normalizer;
}

struct LossParts {
  double f1 = 0.0;
  double f2 = 0.0;
  double f3 = 0.0;
  double total() const { return f1 + f2 - f3; }
};

inline LossParts f_parts(const Eigen::Ref<const Vector>& z, const Eigen::Ref<const Vector>& w, double lambda,
                         double normalizer) {
  detail::require_same_length(z.size(), w.size(), "f_full");
  detail::require(lambda >= 0.0, ErrorCategory::invalid_argument, "f_full: negative lambda");
  detail::require(normalizer > 0.0, ErrorCategory::invalid_argument, "f_full: normalizer must be positive");
  double s1 = 0.0;
  double s2 = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double l = detail::logit_unchecked(z[i]);
    s1 += w[i] * l;
    s2 += w[i] * l * l;
  }
  LossParts p;
  p.f1 = s1 / normalizer;
  p.f2 = lambda / (2.0 * normalizer) * s2;
  p.f3 = lambda / 2.0 * p.f1 * p.f1;
  return p;
}

inline double f_full(const Eigen::Ref<const Vector>& z, const Eigen::Ref<const Vector>& w, double lambda,
                     double normalizer) {
  return f_parts(z, w, lambda, normalizer).total();
}

// Small parts of the loss split: g1 = l(-|t|), g2 = 2 l(-|t|)|t| + l(-|t|)^2.
inline std::pair<double, double> small_part_g(double t) {
  const double a = std::abs(t);
  const double g1 = a > kLossSaturation ? 0.0 : std::log1p(std::exp(-a));
  return {g1, 2.0 * g1 * a + g1 * g1};
}

// Gradient of f_full(X beta) with respect to beta:
//   (1/n) X^T [ w o sigma(z) o (1 + lambda l(z) - lambda f1) ]
inline Vector grad_f(const Eigen::Ref<const Vector>& beta, const RowMatrix& X,
                     const Eigen::Ref<const Vector>& w, double lambda, double normalizer) {
  detail::require(X.cols() == beta.size(), ErrorCategory::dimension_mismatch, "grad_f: beta/X shape mismatch");
  detail::require_same_length(X.rows(), w.size(), "grad_f");
  const Vector z = X * beta;
  const double F1 = f1(z, w, normalizer);
  Vector coef(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double l = detail::logit_unchecked(z[i]);
    coef[i] = w[i] * detail::sigmoid(z[i]) * (1.0 + lambda * l - lambda * F1);
  }
  return X.transpose() * coef / normalizer;
}

// sum_i w_i |row_i . beta_aug| for augmented rows (x_i, -y_i) and beta_aug = (beta, 1).
inline double l1_objective(const RowMatrix& rows, const Eigen::Ref<const Vector>& w,
                           const Eigen::Ref<const Vector>& beta_aug) {
  detail::require(rows.cols() == beta_aug.size(), ErrorCategory::dimension_mismatch,
                  "l1_objective: beta/rows shape mismatch");
  detail::require_same_length(rows.rows(), w.size(), "l1_objective");
  detail::require(beta_aug.size() >= 1 && beta_aug[beta_aug.size() - 1] == 1.0,
                  ErrorCategory::invalid_argument, "l1_objective: last coordinate of beta_aug must be 1");
  return w.dot((rows * beta_aug).cwiseAbs());
}

// Same sum without the normalisation constraint on the last coordinate.
inline double l1_value_unchecked(const RowMatrix& rows, const Eigen::Ref<const Vector>& w,
                                 const Eigen::Ref<const Vector>& beta_aug) {
  return w.dot((rows * beta_aug).cwiseAbs());
}

// Weighted logistic data bound to its normaliser; the solvers minimise this.
class LogisticObjective {
 public:
  LogisticObjective(const RowMatrix& X, const Vector& w, double lambda, double normalizer)
      : X_(X), w_(w), lambda_(lambda), normalizer_(normalizer) {
    detail::require_same_length(X.rows(), w.size(), "LogisticObjective");
    detail::require(lambda >= 0.0, ErrorCategory::invalid_argument, "negative lambda");
    detail::require(normalizer > 0.0, ErrorCategory::invalid_argument, "normalizer must be positive");
  }

  Eigen::Index dim() const { return X_.cols(); }
  double lambda() const { return lambda_; }
  double normalizer() const { return normalizer_; }
  const RowMatrix& X() const { return X_; }
  const Vector& w() const { return w_; }

  double value(const Vector& beta) const { return f_full(X_ * beta, w_, lambda_, normalizer_); }

  double value_and_gradient(const Vector& beta, Vector& grad) const {
    z_.noalias() = X_ * beta;
    double s1 = 0.0;
    double s2 = 0.0;
    loss_.resize(z_.size());
    for (Eigen::Index i = 0; i < z_.size(); ++i) {
      const double l = detail::logit_unchecked(z_[i]);
      loss_[i] = l;
      s1 += w_[i] * l;
      s2 += w_[i] * l * l;
    }
    const double F1 = s1 / normalizer_;
    for (Eigen::Index i = 0; i < z_.size(); ++i) {
      z_[i] = w_[i] * detail::sigmoid(z_[i]) * (1.0 + lambda_ * loss_[i] - lambda_ * F1);
    }
    grad.noalias() = X_.transpose() * z_;
    grad /= normalizer_;
    return F1 + lambda_ / (2.0 * normalizer_) * s2 - lambda_ / 2.0 * F1 * F1;
  }

  // True when beta strictly separates every nonzero row (all x_i beta < 0):
  // scaling beta up then decreases f1 forever, so no finite minimiser exists.
  bool separates(const Vector& beta) const {
    const Vector z = X_ * beta;
    bool any = false;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (X_.row(i).isZero(0.0)) continue;
      if (!(z[i] < 0.0)) return false;
      any = true;
    }
    return any;
  }

 private:
  const RowMatrix& X_;
  const Vector& w_;
  double lambda_;
  double normalizer_;
  mutable Vector z_;
  mutable Vector loss_;
};

}  // namespace obsketch
