#pragma once

// Multi-level oblivious CountMin sketch for logistic and l1 regression.
//
// Rows of the sketch are organised in blocks:
//
//   [ level 0 : N0 = s * N' buckets | level 1 .. h_m-1 : N buckets each | uniform : N_u buckets ]
//
// Level 0 sees every input row and hashes it into one bucket of each of its
// s sub-tables (densification). Level h in [1, h_m-1] keeps a row with
// probability b^-h, and the uniform level keeps it with probability p_u.
// Colliding rows are summed without random signs, so the sign of every
// contribution survives. Bucket weights are 1/s, b^h and 1/p_u.
//
// All randomness is a keyed hash of (seed, row index), which makes the map
// linear and replayable: turnstile updates, merges and sharded construction
// all yield the same state.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "obsketch/errors.hpp"
#include "obsketch/hash.hpp"

namespace obsketch {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class PlanMode : std::uint8_t { theory = 0, budget = 1 };

struct SketchConfig {
  std::uint64_t n = 0;       // row domain size
  std::uint64_t d = 0;       // sketched columns
  std::uint64_t h_m = 1;     // index of the uniform level
  std::uint64_t N = 0;       // buckets per intermediate level
  std::uint64_t N0 = 1;      // buckets at level 0, a multiple of s
  std::uint64_t s = 1;       // level-0 sparsity
  double b = 2.0;            // branching factor, p_h = b^-h
  std::uint64_t N_u = 1;     // buckets at the uniform level
  double p_u = 1.0;          // uniform-level sampling rate
  std::uint64_t seed = 0;
  bool random_shift = false;
  std::uint64_t shift_k = 1;  // number of candidate level-0 sizes
  PlanMode mode = PlanMode::budget;

  std::uint64_t sub_table_size() const { return N0 / s; }
  std::uint64_t intermediate_levels() const { return h_m - 1; }
  std::uint64_t rows() const { return N0 + N * intermediate_levels() + N_u; }

  double level_probability(std::uint64_t h) const {
    if (h == 0) return 1.0;
    if (h >= h_m) return p_u;
    return std::pow(b, -static_cast<double>(h));
  }

  // First global row of level h (h == h_m is the uniform block).
  std::uint64_t level_offset(std::uint64_t h) const {
    if (h == 0) return 0;
    return N0 + N * (std::min(h, h_m) - 1);
  }

  std::uint64_t level_of_row(std::uint64_t row) const {
    if (row < N0) return 0;
    const std::uint64_t rest = row - N0;
    if (N > 0 && rest < N * intermediate_levels()) return 1 + rest / N;
    return h_m;
  }

  double level_weight(std::uint64_t h) const {
    if (h == 0) return 1.0 / static_cast<double>(s);
    if (h >= h_m) return 1.0 / p_u;
    return std::pow(b, static_cast<double>(h));
  }

  friend bool operator==(const SketchConfig&, const SketchConfig&) = default;
};

inline void validate(const SketchConfig& c) {
  using detail::require;
  constexpr auto bad = ErrorCategory::invalid_argument;
  require(c.n >= 1, bad, "config: n must be positive");
  require(c.d >= 1, bad, "config: d must be positive");
  require(c.h_m >= 1, bad, "config: h_m must be at least 1");
  require(c.s >= 1, bad, "config: s must be at least 1");
  require(c.N0 >= c.s, bad, "config: N0 must be at least s");
  require(c.N0 % c.s == 0, bad, "config: N0 must be divisible by s");
  require(c.h_m == 1 || c.N >= 1, bad, "config: intermediate levels need N >= 1");
  require(std::isfinite(c.b) && c.b > 1.0, bad, "config: b must be > 1");
  require(c.N_u >= 1, bad, "config: N_u must be positive");
  require(c.p_u > 0.0 && c.p_u <= 1.0, bad, "config: p_u must lie in (0, 1]");
  require(c.shift_k >= 1, bad, "config: shift_k must be positive");
}

// ---------------------------------------------------------------------------
// Planning

struct TheoryOptions {
  double C = 1.0;   // m1 = ceil(ln(1/delta) + C d ln n)
  double c = 1.0;   // exponent slack in the N lower bound
  std::optional<std::uint64_t> s;               // default ceil(ln(mu d / eps) / eps)
  std::optional<std::uint64_t> level0_buckets;  // default min(N, n / 8)
  std::uint64_t seed = 0;
  bool random_shift = false;
  std::uint64_t shift_k = 4;
};

// Derived quantities of the theory-mode planner, kept for reporting.
struct TheoryPlan {
  SketchConfig config;
  std::uint64_t q_m = 0;
  std::uint64_t m1 = 0;
  double b_formula = 0.0;  // b before clamping to 18 mu / eps
};

namespace detail {

inline std::uint64_t round_up_multiple(std::uint64_t v, std::uint64_t m) {
  return ((v + m - 1) / m) * m;
}

inline std::uint64_t ceil_u64(double v) {
  if (!(v < 1.8e19)) fail(ErrorCategory::no_compression, "parameter overflows 64-bit range");
  return static_cast<std::uint64_t>(std::ceil(v));
}

// Draws the level-0 size from the geometric grid base * 2^j, j < k.
inline void apply_random_shift(SketchConfig& c) {
  if (!c.random_shift || c.shift_k <= 1) return;
  const std::uint64_t j = reduce64(keyed_hash(c.seed, 0, hash_tag::shift), c.shift_k);
  c.N0 = round_up_multiple(c.N0 << j, c.s);
}

inline void check_compresses(const SketchConfig& c) {
  if (c.rows() >= c.n) {
    fail(ErrorCategory::no_compression,
         "no compression: sketch would have " + std::to_string(c.rows()) +
             " rows for n = " + std::to_string(c.n));
  }
}

}  // namespace detail

inline std::uint64_t theory_q_m(double n, double mu, double eps) {
  return static_cast<std::uint64_t>(std::ceil(std::log2(n * (mu + 1.0) / eps)));
}

inline std::uint64_t theory_m1(double n, double d, double delta, double C) {
  return static_cast<std::uint64_t>(std::ceil(std::log(1.0 / delta) + C * d * std::log(n)));
}

// Parameter relations of the theory regime: N from its lower bound, b from N,
// h_m as the first level whose expected sample fits 12 ln n per bucket row,
// and p_u from the small-part concentration requirement.
inline TheoryPlan plan_theory_detailed(std::uint64_t n, std::uint64_t d, double eps, double delta,
                                       double mu, const TheoryOptions& opt = {}) {
  using detail::require;
  constexpr auto bad = ErrorCategory::invalid_argument;
  require(std::isfinite(eps) && eps > 0.0 && eps <= 0.25, bad, "eps out of range (0, 1/4]");
  require(std::isfinite(delta) && delta > 0.0 && delta < 1.0, bad, "delta out of range (0, 1)");
  require(std::isfinite(mu) && mu >= 1.0, bad, "mu out of range [1, inf)");
  require(d >= 1, bad, "d must be positive");
  const double nd = static_cast<double>(n);
  require(nd >= std::max({1.0 / eps, mu, static_cast<double>(d), 1.0 / delta}), bad,
          "n out of range: need n >= max(1/eps, mu, d, 1/delta)");
  require(opt.C >= 0.0 && opt.c > 0.0, bad, "theory constants C >= 0 and c > 0 required");

  TheoryPlan plan;
  plan.q_m = theory_q_m(nd, mu, eps);
  plan.m1 = std::max<std::uint64_t>(1, theory_m1(nd, static_cast<double>(d), delta, opt.C));
  const double qm = static_cast<double>(plan.q_m);
  const double m1 = static_cast<double>(plan.m1);

  SketchConfig& c = plan.config;
  c.n = n;
  c.d = d;
  c.mode = PlanMode::theory;
  c.seed = opt.seed;
  c.random_shift = opt.random_shift;
  c.shift_k = std::max<std::uint64_t>(1, opt.shift_k);

  // N depends on h_m and h_m on N through b; iterate to the fixed point.
  std::uint64_t h_m = 1;
  double N = 0.0;
  double b = 0.0;
  for (int iter = 0; iter < 64; ++iter) {
    N = std::ceil(32.0 * std::pow(m1, 1.0 + opt.c) * std::pow(qm, 1.0 + opt.c) *
                  std::pow(static_cast<double>(h_m), opt.c) * mu / std::pow(eps, 6.0));
    plan.b_formula = N * std::pow(eps, 5.0) / (32.0 * m1 * qm * mu);
    b = std::max(plan.b_formula, 18.0 * mu / eps);
    std::uint64_t next = 1;
    while (nd * std::pow(b, -static_cast<double>(next)) / (b * N) > 12.0 * std::log(nd)) ++next;
    if (next == h_m) break;
    h_m = next;
  }
  c.h_m = h_m;
  c.N = detail::ceil_u64(N);
  c.b = b;
  c.p_u = std::min(1.0, 64.0 * mu * m1 / (eps * eps * nd));
  c.N_u = std::max<std::uint64_t>(1, detail::ceil_u64(nd * c.p_u));

  const std::uint64_t s =
      opt.s.value_or(std::max<std::uint64_t>(
          1, static_cast<std::uint64_t>(std::ceil(std::log(mu * static_cast<double>(d) / eps) / eps))));
  require(s >= 1, bad, "s must be at least 1");
  c.s = s;
  const std::uint64_t level0 = opt.level0_buckets.value_or(std::min<std::uint64_t>(c.N, n / 8));
  c.N0 = detail::round_up_multiple(std::max<std::uint64_t>(level0, 1), s);
  detail::apply_random_shift(c);
  validate(c);
  detail::check_compresses(c);
  return plan;
}

inline SketchConfig plan_theory(std::uint64_t n, std::uint64_t d, double eps, double delta,
                                double mu, const TheoryOptions& opt = {}) {
  return plan_theory_detailed(n, d, eps, delta, mu, opt).config;
}

struct BudgetOptions {
  std::uint64_t seed = 0;
  bool random_shift = false;
  std::uint64_t shift_k = 1;
};

// Splits a row budget across the h_m + 1 level blocks. The uniform level gets
// min(target / (h_m + 1), ceil(n b^-h_m)) buckets; the rest is shared equally
// by level 0 and the h_m - 1 intermediate levels, level 0 rounded down to a
// multiple of s.
inline SketchConfig plan_budget(std::uint64_t n, std::uint64_t d, std::uint64_t target_rows,
                                std::uint64_t s, std::uint64_t h_m, double b,
                                const BudgetOptions& opt = {}) {
  using detail::require;
  constexpr auto bad = ErrorCategory::invalid_argument;
  require(n >= 1 && d >= 1, bad, "n and d must be positive");
  require(s >= 1, bad, "s must be at least 1");
  require(h_m >= 1, bad, "h_m must be at least 1");
  require(std::isfinite(b) && b > 1.0, bad, "constraint violated: b > 1");
  require(target_rows >= s + h_m, bad, "constraint violated: target_rows >= s + h_m");
  if (target_rows >= n) {
    detail::fail(ErrorCategory::no_compression,
                 "no compression: target_rows " + std::to_string(target_rows) + " >= n " +
                     std::to_string(n));
  }

  SketchConfig c;
  c.n = n;
  c.d = d;
  c.h_m = h_m;
  c.s = s;
  c.b = b;
  c.seed = opt.seed;
  c.mode = PlanMode::budget;
  c.random_shift = opt.random_shift;
  c.shift_k = std::max<std::uint64_t>(1, opt.shift_k);
  c.p_u = std::pow(b, -static_cast<double>(h_m));
  const double expected_uniform = std::ceil(static_cast<double>(n) * c.p_u);
  c.N_u = std::max<std::uint64_t>(
      1, std::min<std::uint64_t>(target_rows / (h_m + 1), static_cast<std::uint64_t>(expected_uniform)));

  const std::uint64_t rest = target_rows - c.N_u;
  c.N = h_m > 1 ? rest / h_m : 0;
  const std::uint64_t level0 = rest - c.N * (h_m - 1);
  c.N0 = (level0 / s) * s;
  require(c.N0 >= s, bad, "constraint violated: level 0 needs at least s buckets");
  require(h_m == 1 || c.N >= 1, bad, "constraint violated: intermediate levels need N >= 1");
  detail::apply_random_shift(c);
  validate(c);
  detail::check_compresses(c);
  return c;
}

// ---------------------------------------------------------------------------
// Row assignment

struct RowAssignment {
  std::uint64_t row_index = 0;
  std::vector<std::uint64_t> targets;
};

// Precomputed per-level inclusion thresholds on a 32-bit hash field.
class LevelTable {
 public:
  LevelTable() = default;

  explicit LevelTable(const SketchConfig& c) : config_(c) {
    for (std::uint64_t h = 1; h < c.h_m; ++h) thresholds_.push_back(threshold(c.level_probability(h)));
    uniform_threshold_ = threshold(c.p_u);
  }

  const SketchConfig& config() const { return config_; }

  // Calls fn(global_row) once per bucket row that input row i feeds.
  template <class Fn>
  void for_each_target(std::uint64_t i, Fn&& fn) const {
    const SketchConfig& c = config_;
    const std::uint64_t sub = c.sub_table_size();
    for (std::uint64_t l = 0; l < c.s; ++l) {
      const std::uint64_t h = keyed_hash(c.seed, i, hash_tag::level0 + l);
      fn(l * sub + reduce64(h, sub));
    }
    for (std::uint64_t lvl = 1; lvl < c.h_m; ++lvl) {
      const std::uint64_t h = keyed_hash(c.seed, i, hash_tag::level + lvl);
      if ((h >> 32) < thresholds_[lvl - 1]) {
        fn(c.level_offset(lvl) + reduce32(static_cast<std::uint32_t>(h), c.N));
      }
    }
    const std::uint64_t h = keyed_hash(c.seed, i, hash_tag::uniform);
    if ((h >> 32) < uniform_threshold_) {
      fn(c.level_offset(c.h_m) + reduce32(static_cast<std::uint32_t>(h), c.N_u));
    }
  }

 private:
  static std::uint64_t threshold(double p) {
    if (p >= 1.0) return std::uint64_t{1} << 32;
    return static_cast<std::uint64_t>(std::ldexp(p, 32));
  }

  SketchConfig config_;
  std::vector<std::uint64_t> thresholds_;
  std::uint64_t uniform_threshold_ = 0;
};

inline RowAssignment assignment(const SketchConfig& config, std::uint64_t i) {
  if (i >= config.n) {
    detail::fail(ErrorCategory::index_out_of_range,
                 "row index " + std::to_string(i) + " out of range for n = " + std::to_string(config.n));
  }
  RowAssignment a;
  a.row_index = i;
  LevelTable(config).for_each_target(i, [&](std::uint64_t t) { a.targets.push_back(t); });
  return a;
}

// ---------------------------------------------------------------------------
// Sketch state

class SketchState {
 public:
  SketchState() = default;

  explicit SketchState(const SketchConfig& config)
      : config_(config), table_(config), n_original_(config.n) {
    validate(config);
    const auto r = static_cast<Eigen::Index>(config.rows());
    buckets_ = RowMatrix::Zero(r, static_cast<Eigen::Index>(config.d));
    weights_.resize(r);
    for (Eigen::Index j = 0; j < r; ++j) {
      weights_[j] = config.level_weight(config.level_of_row(static_cast<std::uint64_t>(j)));
    }
  }

  // Rebuilds a state from stored parts (deserialization).
  SketchState(const SketchConfig& config, RowMatrix buckets, Vector weights)
      : config_(config), table_(config), buckets_(std::move(buckets)), weights_(std::move(weights)),
        n_original_(config.n) {
    validate(config);
    detail::require(static_cast<std::uint64_t>(buckets_.rows()) == config.rows() &&
                        static_cast<std::uint64_t>(buckets_.cols()) == config.d &&
                        static_cast<std::uint64_t>(weights_.size()) == config.rows(),
                    ErrorCategory::dimension_mismatch, "state shape does not match config");
  }

  const SketchConfig& config() const { return config_; }
  const RowMatrix& buckets() const { return buckets_; }
  const Vector& weights() const { return weights_; }
  std::uint64_t n_original() const { return n_original_; }
  std::uint64_t rows() const { return config_.rows(); }

  // Adds delta to every bucket row fed by input row i.
  void update(std::uint64_t i, std::span<const double> delta) {
    check_index(i);
    if (delta.size() != config_.d) {
      detail::fail(ErrorCategory::dimension_mismatch, "update: delta has " + std::to_string(delta.size()) +
                                                          " entries, expected " + std::to_string(config_.d));
    }
    bool finite = true;
    for (double v : delta) finite = finite && std::isfinite(v);
    detail::require(finite, ErrorCategory::non_finite, "update: non-finite delta");
    const Eigen::Map<const Eigen::RowVectorXd> row(delta.data(), static_cast<Eigen::Index>(delta.size()));
    table_.for_each_target(i, [&](std::uint64_t t) {
      buckets_.row(static_cast<Eigen::Index>(t)) += row;
    });
  }

  template <class Derived>
  void update(std::uint64_t i, const Eigen::DenseBase<Derived>& delta) {
    const Eigen::RowVectorXd tmp = delta.derived().reshaped().transpose();
    update(i, std::span<const double>(tmp.data(), static_cast<std::size_t>(tmp.size())));
  }

  // Sparse row update: cost O(nnz * targets).
  void update_sparse(std::uint64_t i, std::span<const std::uint64_t> cols,
                     std::span<const double> values) {
    check_index(i);
    detail::require(cols.size() == values.size(), ErrorCategory::dimension_mismatch,
                    "update_sparse: index/value length mismatch");
    for (std::size_t k = 0; k < cols.size(); ++k) {
      detail::require(cols[k] < config_.d, ErrorCategory::dimension_mismatch,
                      "update_sparse: column out of range");
      detail::require(std::isfinite(values[k]), ErrorCategory::non_finite,
                      "update_sparse: non-finite value");
    }
    table_.for_each_target(i, [&](std::uint64_t t) {
      double* row = buckets_.row(static_cast<Eigen::Index>(t)).data();
      for (std::size_t k = 0; k < cols.size(); ++k) row[cols[k]] += values[k];
    });
  }

  void merge_from(const SketchState& other) {
    detail::require(other.config_ == config_, ErrorCategory::incompatible,
                    "merge: sketches have different configs or seeds");
    buckets_ += other.buckets_;
  }

  friend bool operator==(const SketchState& a, const SketchState& b) {
    return a.config_ == b.config_ && a.n_original_ == b.n_original_ && a.buckets_ == b.buckets_ &&
           a.weights_ == b.weights_;
  }

 private:
  void check_index(std::uint64_t i) const {
    if (i >= config_.n) {
      detail::fail(ErrorCategory::index_out_of_range,
                   "row index " + std::to_string(i) + " out of range for n = " +
                       std::to_string(config_.n));
    }
  }

  SketchConfig config_;
  LevelTable table_;
  RowMatrix buckets_;
  Vector weights_;
  std::uint64_t n_original_ = 0;
};

inline SketchState init(const SketchConfig& config) { return SketchState(config); }

// Sketches rows of X as input rows first_row, first_row + 1, ... into a fresh
// state. Shards of one matrix sketched this way merge into the sketch of the
// whole matrix.
template <class Derived>
SketchState sketch_shard(const SketchConfig& config, const Eigen::MatrixBase<Derived>& X,
                         std::uint64_t first_row) {
  detail::require(static_cast<std::uint64_t>(X.cols()) == config.d, ErrorCategory::dimension_mismatch,
                  "sketch: column count does not match config.d");
  SketchState state(config);
  Eigen::RowVectorXd row(X.cols());
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    row = X.row(k);
    state.update(first_row + static_cast<std::uint64_t>(k),
                 std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
  return state;
}

// One pass over all n rows of X.
template <class Derived>
SketchState sketch_matrix(const SketchConfig& config, const Eigen::MatrixBase<Derived>& X) {
  detail::require(static_cast<std::uint64_t>(X.rows()) == config.n, ErrorCategory::dimension_mismatch,
                  "sketch_matrix: row count " + std::to_string(X.rows()) + " != n " +
                      std::to_string(config.n));
  return sketch_shard(config, X, 0);
}

inline SketchState merge(const SketchState& a, const SketchState& b) {
  SketchState out = a;
  out.merge_from(b);
  return out;
}

}  // namespace obsketch
