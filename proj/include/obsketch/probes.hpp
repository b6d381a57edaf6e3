#pragma once

// Measurement tools for the analysis: weight-class decomposition of z,
// the per-level interval endpoints q(1..4), and seed-averaged contraction /
// dilation of the positive part through the sketch.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "obsketch/errors.hpp"
#include "obsketch/hash.hpp"
#include "obsketch/sketch.hpp"

namespace obsketch {

struct WeightClass {
  std::vector<std::uint64_t> indices;
  double mass = 0.0;
  bool important = false;
};

struct WeightClassDecomposition {
  std::uint64_t q_max = 0;
  std::map<std::uint64_t, WeightClass> classes;
  double residual_mass = 0.0;   // positive mass at or below 2^(-q_max-1)
  double positive_mass = 0.0;   // ||z+||_1 after normalisation
  double importance_threshold = 0.0;
};

inline std::uint64_t default_q_m(std::uint64_t n, double mu, double eps) { return theory_q_m(static_cast<double>(n), mu, eps); }

// Class index q with v in (2^(-q-1), 2^(-q)] for 0 < v <= 1.
inline std::uint64_t weight_class_of(double v) {
  int e = 0;
  const double m = std::frexp(v, &e);
  return static_cast<std::uint64_t>(m == 0.5 ? 1 - e : -e);
}

// Normalises z to unit l1 norm and buckets positive entries into W_q+.
// A class is flagged important when its mass is at least eps / (mu q_m).
inline WeightClassDecomposition decompose(const Eigen::Ref<const Vector>& z, std::uint64_t q_max,
                                          double eps = 0.25, double mu = 1.0, std::uint64_t q_m = 0) {
  const double norm = z.lpNorm<1>();
  detail::require(norm > 0.0 && std::isfinite(norm), ErrorCategory::invalid_argument,
                  "decompose: z must be nonzero and finite");
  WeightClassDecomposition out;
  out.q_max = q_max;
  const std::uint64_t qm = q_m == 0 ? default_q_m(static_cast<std::uint64_t>(z.size()), mu, eps) : q_m;
  out.importance_threshold = eps / (mu * static_cast<double>(qm));
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (!(z[i] > 0.0)) continue;
    const double v = z[i] / norm;
    out.positive_mass += v;
    const std::uint64_t q = weight_class_of(v);
    if (q > q_max) {
      out.residual_mass += v;
      continue;
    }
    WeightClass& cls = out.classes[q];
    cls.indices.push_back(static_cast<std::uint64_t>(i));
    cls.mass += v;
  }
  for (auto& [q, cls] : out.classes) cls.important = cls.mass >= out.importance_threshold;
  return out;
}

// sum_{z<0} |z| / sum_{z>0} z
inline double mu_z(const Eigen::Ref<const Vector>& z) {
  double pos = 0.0;
  double neg = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z[i] > 0.0) pos += z[i];
    else neg -= z[i];
  }
  detail::require(pos > 0.0, ErrorCategory::invalid_argument, "mu_z: z has no positive mass");
  return neg / pos;
}

struct EndpointInputs {
  double n = 0;       // rows of the data
  double M = 0;       // expected rows reaching the level
  double N = 0;       // buckets at the level
  double eps = 0;
  double delta = 0;
  double m1 = 0;
  double q_m = 0;
  double h_m = 0;
  double mu_z = 0;
};

struct IntervalEndpoints {
  double q1 = 0.0;
  double q2 = 0.0;
  double q3 = 0.0;
  double q4 = 0.0;
};

// Endpoint formulas with p = M / n, without the level conventions; the
// difference identities hold exactly on these.
inline IntervalEndpoints endpoints_raw(const EndpointInputs& in) {
  const bool ok = in.n > 0 && in.M > 0 && in.N > 0 && in.eps > 0 && in.delta > 0 && in.m1 > 0 && in.q_m > 0 &&
                  in.h_m > 0 && in.mu_z > 0;
  detail::require(ok, ErrorCategory::invalid_argument, "endpoints: all inputs must be positive");
  detail::require(in.M <= in.n, ErrorCategory::invalid_argument, "endpoints: need M <= n");
  const double p = in.M / in.n;
  const double e = in.eps;
  IntervalEndpoints q;
  q.q1 = std::log2(in.mu_z * in.delta / (p * in.h_m));
  q.q2 = std::log2(8.0 * in.q_m * in.mu_z * in.m1 / (e * e * e * p));
  q.q3 = std::log2(in.N * e * e / (4.0 * p));
  q.q4 = std::log2(2.0 * in.N * std::log(in.N * in.h_m / in.delta) / (p * e * e));
  return q;
}

// M = n (level 0) pins q1 = q2 = 0; N >= M (uniform level, one bucket per
// surviving row) sends q3 = q4 = inf.
inline IntervalEndpoints endpoints(const EndpointInputs& in) {
  IntervalEndpoints q = endpoints_raw(in);
  if (in.M == in.n) q.q1 = q.q2 = 0.0;
  if (in.N >= in.M) q.q3 = q.q4 = std::numeric_limits<double>::infinity();
  return q;
}

struct ProbeStats {
  double z_pos = 0.0;  // ||z+||_1 on the full data
  double min = 0.0;
  double p10 = 0.0;
  double median = 0.0;
  double mean = 0.0;
  double max = 0.0;
  std::vector<double> per_seed;
};

struct ProbeReport {
  std::uint64_t num_seeds = 0;
  std::uint64_t sketch_rows = 0;
  double band_low = 0.5;
  double band_high = 3.0;
  std::vector<ProbeStats> betas;
};

inline std::uint64_t probe_seed(std::uint64_t base, std::uint64_t k) { return keyed_hash(base, k, 0x50524f42); }

namespace detail {

inline double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

// For each beta (a column of betas) and each seed, sketches z = X beta with
// the config reseeded and records sum_j w_j max((Sz)_j, 0).
inline ProbeReport measure_contraction_dilation(const RowMatrix& X, const SketchConfig& config,
                                                const Eigen::MatrixXd& betas, std::uint64_t num_seeds,
                                                std::uint64_t base_seed = 0) {
  detail::require(num_seeds >= 1, ErrorCategory::invalid_argument, "probe: num_seeds must be >= 1");
  detail::require(betas.rows() == X.cols(), ErrorCategory::dimension_mismatch, "probe: beta dimension mismatch");
  detail::require(static_cast<std::uint64_t>(X.rows()) == config.n, ErrorCategory::dimension_mismatch,
                  "probe: data rows do not match config.n");
  const Eigen::Index k = betas.cols();
  const RowMatrix Z = X * betas;
  ProbeReport report;
  report.num_seeds = num_seeds;
  report.sketch_rows = config.rows();
  report.betas.resize(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) report.betas[static_cast<std::size_t>(j)].z_pos = Z.col(j).cwiseMax(0.0).sum();

  SketchConfig c = config;
  c.d = static_cast<std::uint64_t>(k);
  for (std::uint64_t t = 0; t < num_seeds; ++t) {
    c.seed = probe_seed(base_seed, t);
    const SketchState st = sketch_matrix(c, Z);
    const Vector est = st.buckets().cwiseMax(0.0).transpose() * st.weights();
    for (Eigen::Index j = 0; j < k; ++j) report.betas[static_cast<std::size_t>(j)].per_seed.push_back(est[j]);
  }
  for (ProbeStats& s : report.betas) {
    std::vector<double> v = s.per_seed;
    std::sort(v.begin(), v.end());
    s.min = v.front();
    s.max = v.back();
    s.p10 = detail::quantile_sorted(v, 0.1);
    s.median = detail::quantile_sorted(v, 0.5);
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
  }
  return report;
}

// One row per beta and statistic; ratio is value / ||z+||_1.
inline void write_probe_csv(std::ostream& out, const ProbeReport& report) {
  out << "beta,statistic,value,z_pos,ratio\n";
  out.precision(17);
  for (std::size_t j = 0; j < report.betas.size(); ++j) {
    const ProbeStats& s = report.betas[j];
    const std::pair<const char*, double> rows[] = {
        {"min", s.min}, {"p10", s.p10}, {"median", s.median}, {"mean", s.mean}, {"max", s.max}};
    for (const auto& [name, value] : rows) {
      const double ratio = s.z_pos > 0.0 ? value / s.z_pos : std::numeric_limits<double>::quiet_NaN();
      out << j << ',' << name << ',' << value << ',' << s.z_pos << ',' << ratio << '\n';
    }
  }
}

}  // namespace obsketch
