#include <cstdio>
#include <random>

#include <gtest/gtest.h>

#include "obsketch/obsketch.hpp"
#include "test_util.hpp"

using namespace obsketch;
using obsketch::test_support::category_of;

namespace {

SketchState sample_state() {
  const SketchConfig c = plan_budget(5000, 4, 600, 3, 2, 4.0, BudgetOptions{11});
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  RowMatrix X(5000, 4);
  for (Eigen::Index k = 0; k < X.size(); ++k) X.data()[k] = g(rng);
  return sketch_matrix(c, X);
}

}  // namespace

TEST(SketchIo, RoundTripIsExact) {
  const SketchState st = sample_state();
  const auto bytes = serialize(st);
  EXPECT_EQ(bytes.size(), 4 + 2 + 6 * 8 + 8 + 8 + 8 + 8 + 1 + 8 + 1 + 8 + st.rows() * 8 * 5);
  const SketchState back = deserialize(bytes);
  EXPECT_TRUE(back == st);
}

TEST(SketchIo, FileRoundTrip) {
  const SketchState st = sample_state();
  const std::string path = ::testing::TempDir() + "roundtrip.obsk";
  write_sketch_file(path, st);
  EXPECT_TRUE(read_sketch_file(path) == st);
  std::remove(path.c_str());
}

TEST(SketchIo, DeserializedSketchKeepsStreaming) {
  const SketchState st = sample_state();
  SketchState a = deserialize(serialize(st));
  SketchState b = st;
  const std::vector<double> row{1.0, 2.0, 3.0, 4.0};
  a.update(42, row);
  b.update(42, row);
  EXPECT_TRUE(a == b);
}

TEST(SketchIo, Errors) {
  const auto good = serialize(sample_state());
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_EQ(category_of([&] { deserialize(bad_magic); }), ErrorCategory::bad_magic);

  auto bad_version = good;
  bad_version[4] = 2;
  EXPECT_EQ(category_of([&] { deserialize(bad_version); }), ErrorCategory::version_mismatch);

  std::vector<std::uint8_t> cut(good.begin(), good.end() - 9);
  EXPECT_EQ(category_of([&] { deserialize(cut); }), ErrorCategory::truncated);
  std::vector<std::uint8_t> header_only(good.begin(), good.begin() + 20);
  EXPECT_EQ(category_of([&] { deserialize(header_only); }), ErrorCategory::truncated);
  std::vector<std::uint8_t> tiny(good.begin(), good.begin() + 2);
  EXPECT_EQ(category_of([&] { deserialize(tiny); }), ErrorCategory::truncated);

  EXPECT_EQ(category_of([] { read_sketch_file("/nonexistent/dir/file.obsk"); }), ErrorCategory::io);
}
