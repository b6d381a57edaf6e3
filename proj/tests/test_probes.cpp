#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "obsketch/obsketch.hpp"
#include "test_util.hpp"

using namespace obsketch;
using obsketch::test_support::category_of;

TEST(WeightClass, HalfOpenIntervals) {
  EXPECT_EQ(weight_class_of(1.0), 0u);
  EXPECT_EQ(weight_class_of(0.75), 0u);
  EXPECT_EQ(weight_class_of(0.5), 1u);
  EXPECT_EQ(weight_class_of(0.5000001), 0u);
  EXPECT_EQ(weight_class_of(0.25), 2u);
  EXPECT_EQ(weight_class_of(0.3), 1u);
  EXPECT_EQ(weight_class_of(std::ldexp(1.0, -10)), 10u);
}

TEST(Decompose, MassesAndImportance) {
  Vector z(6);
  z << 4.0, -2.0, 1.0, 0.5, 0.5, 0.0;  // |z|_1 = 8
  const WeightClassDecomposition dec = decompose(z, 3, 0.25, 1.0, 4);
  EXPECT_DOUBLE_EQ(dec.positive_mass, 6.0 / 8.0);
  EXPECT_DOUBLE_EQ(dec.importance_threshold, 0.25 / 4.0);
  ASSERT_EQ(dec.classes.count(1), 1u);  // 0.5
  ASSERT_EQ(dec.classes.count(3), 1u);  // 0.125, 0.0625 goes to the residual
  EXPECT_EQ(dec.classes.at(1).indices, (std::vector<std::uint64_t>{0}));
  EXPECT_EQ(dec.classes.at(3).indices, (std::vector<std::uint64_t>{2}));
  EXPECT_DOUBLE_EQ(dec.residual_mass, 2 * 0.0625);
  EXPECT_TRUE(dec.classes.at(1).important);
  EXPECT_TRUE(dec.classes.at(3).important);
  EXPECT_EQ(category_of([] { decompose(Vector::Zero(3), 4); }), ErrorCategory::invalid_argument);
}

TEST(MuZ, RatioOfNegativeToPositiveMass) {
  Vector z(4);
  z << 3.0, -1.0, 1.0, -2.0;
  EXPECT_DOUBLE_EQ(mu_z(z), 3.0 / 4.0);
  EXPECT_EQ(category_of([] { mu_z(-Vector::Ones(2)); }), ErrorCategory::invalid_argument);
}

TEST(Endpoints, DifferenceIdentities) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    EndpointInputs in;
    in.n = std::pow(10.0, 3.0 + 4.0 * u(rng));
    in.M = in.n * (0.001 + 0.999 * u(rng));
    in.N = 1.0 + 1e4 * u(rng);
    in.eps = 0.01 + 0.24 * u(rng);
    in.delta = 0.001 + 0.5 * u(rng);
    in.m1 = 1.0 + 100.0 * u(rng);
    in.q_m = 1.0 + 40.0 * u(rng);
    in.h_m = 1.0 + 6.0 * u(rng);
    in.mu_z = 0.1 + 10.0 * u(rng);
    const IntervalEndpoints q = endpoints_raw(in);
    const double e = in.eps;
    EXPECT_NEAR(q.q2 - q.q1, std::log2(8 * in.q_m * in.m1 * in.h_m / (e * e * e * in.delta)), 1e-10);
    EXPECT_NEAR(q.q3 - q.q2, std::log2(in.N * std::pow(e, 5) / (32 * in.m1 * in.mu_z * in.q_m)), 1e-10);
    EXPECT_NEAR(q.q4 - q.q3, std::log2(8 * std::log(in.N * in.h_m / in.delta) / std::pow(e, 4)), 1e-10);
  }
}

TEST(Endpoints, LevelConventions) {
  EndpointInputs in{1000, 1000, 50, 0.25, 0.1, 10, 12, 3, 1.0};
  const IntervalEndpoints top = endpoints(in);
  EXPECT_EQ(top.q1, 0.0);
  EXPECT_EQ(top.q2, 0.0);
  EXPECT_TRUE(std::isfinite(top.q3));
  in.M = 40;
  const IntervalEndpoints uni = endpoints(in);
  EXPECT_TRUE(std::isinf(uni.q3));
  EXPECT_TRUE(std::isinf(uni.q4));
  in.M = 2000;
  EXPECT_EQ(category_of([&] { endpoints(in); }), ErrorCategory::invalid_argument);
  in.M = 10;
  in.eps = 0.0;
  EXPECT_EQ(category_of([&] { endpoints(in); }), ErrorCategory::invalid_argument);
}

TEST(Probe, NonnegativeDataHasNoCancellation) {
  // With z >= 0 no cancellation occurs: level 0 returns |z|_1 exactly and the
  // sampled uniform level with p = 1 does too.
  SketchConfig c;
  c.n = 500;
  c.d = 2;
  c.h_m = 1;
  c.s = 2;
  c.N0 = 20;
  c.N_u = 30;
  c.p_u = 1.0;
  RowMatrix X = RowMatrix::Ones(500, 2);
  X.col(1).setLinSpaced(500, 0.0, 1.0);
  Eigen::MatrixXd betas(2, 2);
  betas << 1.0, 0.5, 0.0, 2.0;
  const ProbeReport rep = measure_contraction_dilation(X, c, betas, 5, 3);
  ASSERT_EQ(rep.betas.size(), 2u);
  for (const ProbeStats& s : rep.betas) {
    EXPECT_NEAR(s.median, 2.0 * s.z_pos, 1e-9 * s.z_pos);
    EXPECT_NEAR(s.min, s.max, 1e-9 * s.z_pos);
    EXPECT_EQ(s.per_seed.size(), 5u);
  }
  std::ostringstream out;
  write_probe_csv(out, rep);
  EXPECT_EQ(out.str().substr(0, 31), "beta,statistic,value,z_pos,rati");
}

TEST(Probe, StatisticsAreOrdered) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  RowMatrix X(3000, 3);
  for (Eigen::Index k = 0; k < X.size(); ++k) X.data()[k] = g(rng);
  const SketchConfig c = plan_budget(3000, 3, 300, 3, 2, 4.0);
  const Eigen::MatrixXd betas = Eigen::MatrixXd::Identity(3, 3);
  const ProbeReport rep = measure_contraction_dilation(X, c, betas, 10);
  for (const ProbeStats& s : rep.betas) {
    EXPECT_GT(s.min, 0.0);
    EXPECT_LE(s.p10, s.median);
    EXPECT_LE(s.median, s.max);
  }
}
