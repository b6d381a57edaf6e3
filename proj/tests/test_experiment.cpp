#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "obsketch/obsketch.hpp"
#include "test_util.hpp"

using namespace obsketch;
using obsketch::test_support::category_of;
using nlohmann::json;

namespace {

json small_spec() {
  return json::parse(R"({
    "dataset": {"generate": "synthetic", "n_half": 1000, "d": 5},
    "objective": {"kind": "logistic", "lambdas": [0.0]},
    "methods": [{"type": "old_sketch"}, {"type": "new_sketch", "s": 4}, {"type": "uniform"},
                {"type": "sgd", "repetitions": 3}],
    "sizes": [200, 400],
    "repetitions": 3,
    "sketch": {"h_m": 1, "b": 2},
    "seed": 9
  })");
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("OBSKETCH_CLI");
  if (!cli) return -1;
  const int status = std::system((std::string(cli) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Spec, ParsesDefaultsAndLabels) {
  const ExperimentSpec spec = parse_experiment_spec(small_spec());
  ASSERT_EQ(spec.methods.size(), 4u);
  EXPECT_EQ(spec.methods[0].label, "old_sketch");
  EXPECT_EQ(spec.methods[0].s, 1u);
  EXPECT_EQ(spec.methods[1].label, "sketch_s4");
  EXPECT_EQ(spec.h_m, 1u);
  EXPECT_EQ(spec.seed, 9u);
  EXPECT_EQ(spec.sgd_repetitions, 21u);
}

TEST(Spec, RejectsBadSpecs) {
  json j = small_spec();
  j["unknown"] = 1;
  EXPECT_EQ(category_of([&] { parse_experiment_spec(j); }), ErrorCategory::invalid_argument);
  j = small_spec();
  j["methods"].push_back({{"type", "cauchy"}});
  EXPECT_EQ(category_of([&] { parse_experiment_spec(j); }), ErrorCategory::invalid_argument);
  j = small_spec();
  j["methods"][0]["type"] = "magic";
  EXPECT_EQ(category_of([&] { parse_experiment_spec(j); }), ErrorCategory::invalid_argument);
  j = small_spec();
  j["objective"] = {{"kind", "l1"}, {"lambdas", {0.5}}};
  EXPECT_EQ(category_of([&] { parse_experiment_spec(j); }), ErrorCategory::invalid_argument);
  j = small_spec();
  j.erase("sizes");
  EXPECT_EQ(category_of([&] { parse_experiment_spec(j); }), ErrorCategory::invalid_argument);
}

TEST(Spec, SeedEnvironmentOverride) {
  ::setenv(kSeedEnvVar, "123", 1);
  const ExperimentSpec spec = parse_experiment_spec(small_spec());
  ::setenv(kSeedEnvVar, "abc", 1);
  const ErrorCategory bad = category_of([] { parse_experiment_spec(small_spec()); });
  ::unsetenv(kSeedEnvVar);
  EXPECT_EQ(spec.seed, 123u);
  EXPECT_EQ(bad, ErrorCategory::invalid_argument);
}

TEST(Spec, LoadsFileWithComments) {
  const std::string path = ::testing::TempDir() + "spec.json";
  std::ofstream(path) << "// comment\n" << small_spec().dump();
  EXPECT_EQ(load_experiment_spec(path).methods.size(), 4u);
  std::ofstream(path) << "{ not json";
  EXPECT_EQ(category_of([&] { load_experiment_spec(path); }), ErrorCategory::parse);
  std::remove(path.c_str());
}

TEST(Run, RecordsAreCompleteAndThreadCountInvariant) {
  ExperimentSpec spec = parse_experiment_spec(small_spec());
  spec.threads = 1;
  const ExperimentResult a = run_experiment(spec);
  spec.threads = 3;
  const ExperimentResult b = run_experiment(spec);
  ASSERT_EQ(a.records.size(), 3u * 2u * 3u + 3u);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    const ExperimentRecord& r = a.records[k];
    EXPECT_EQ(r.method, b.records[k].method);
    EXPECT_EQ(r.seed, b.records[k].seed);
    EXPECT_EQ(r.objective_full_data, b.records[k].objective_full_data);
    EXPECT_TRUE(r.error.empty() || r.error == "diverged") << r.error;
    EXPECT_NEAR(r.approx_ratio, r.objective_full_data / a.optimum.at(0.0), 1e-15 * r.approx_ratio);
    EXPECT_GE(r.approx_ratio, 1.0 - kSolverSlack);
  }
  EXPECT_EQ(a.n, 2000u);

  const auto summary = summarize(a.records);
  EXPECT_EQ(summary.size(), 3u * 2u + 1u);
  std::ostringstream csv;
  write_records_csv(csv, a.records);
  EXPECT_EQ(csv.str().rfind("# schema: obsketch-results/1\nmethod,size,seed,lambda,", 0), 0u);
  std::ostringstream sum;
  write_summary_csv(sum, summary);
  EXPECT_NE(sum.str().find("sketch_s4,0,200,3,0,"), std::string::npos);
  std::ostringstream svg;
  write_svg(svg, summary, true);
  EXPECT_NE(svg.str().find("<polyline"), std::string::npos);
}

TEST(Run, SeedsDifferAcrossRepetitionsAndMethods) {
  EXPECT_NE(record_seed(1, "a", 100, 0), record_seed(1, "a", 100, 1));
  EXPECT_NE(record_seed(1, "a", 100, 0), record_seed(1, "b", 100, 0));
  EXPECT_NE(record_seed(1, "a", 100, 0), record_seed(2, "a", 100, 0));
}

TEST(Run, ErrorsAreRecordedNotThrown) {
  ExperimentSpec spec = parse_experiment_spec(small_spec());
  spec.methods.resize(1);
  spec.sizes = {5000};  // no compression
  spec.repetitions = 1;
  const ExperimentResult r = run_experiment(spec);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].error.rfind("no_compression", 0), 0u);
  const auto summary = summarize(r.records);
  EXPECT_EQ(summary[0].failures, 1u);
  EXPECT_TRUE(std::isnan(summary[0].median_ratio));
}

TEST(Cli, ShardedSketchMergeSolve) {
  if (!std::getenv("OBSKETCH_CLI")) GTEST_SKIP() << "OBSKETCH_CLI not set";
  const std::string dir = ::testing::TempDir();
  const std::string data = dir + "cli_data.csv";
  ASSERT_EQ(run_cli("generate exact-l1 --n 300 --d 2 --seed 3 -o " + data), 0);

  // Split the data rows into two shards, keeping the header in both.
  std::ifstream in(data);
  std::string header, line;
  std::getline(in, header);
  std::ofstream a(dir + "cli_a.csv"), b(dir + "cli_b.csv");
  a << header << '\n';
  b << header << '\n';
  for (int k = 0; std::getline(in, line); ++k) (k < 120 ? a : b) << line << '\n';
  a.close();
  b.close();

  const std::string common = " --objective l1 --labels regression --n 300 --target-rows 100 --s 2 --h-m 1 --seed 4";
  ASSERT_EQ(run_cli("sketch -i " + dir + "cli_a.csv -o " + dir + "a.obsk" + common), 0);
  ASSERT_EQ(run_cli("sketch -i " + dir + "cli_b.csv --first-row 120 -o " + dir + "b.obsk" + common), 0);
  ASSERT_EQ(run_cli("sketch -i " + data + " -o " + dir + "whole.obsk" + common), 0);
  ASSERT_EQ(run_cli("merge " + dir + "a.obsk " + dir + "b.obsk -o " + dir + "merged.obsk"), 0);
  EXPECT_TRUE(read_sketch_file(dir + "merged.obsk") == read_sketch_file(dir + "whole.obsk"));
  EXPECT_EQ(run_cli("solve --objective l1 --sketch " + dir + "merged.obsk"), 0);

  // Error categories map to exit codes.
  EXPECT_EQ(run_cli("sketch -i " + data + " -o " + dir + "x.obsk --labels regression --objective l1 --target-rows 400"),
            static_cast<int>(ErrorCategory::no_compression));
  EXPECT_EQ(run_cli("solve --sketch " + data), static_cast<int>(ErrorCategory::bad_magic));
  EXPECT_EQ(run_cli("merge " + dir + "a.obsk " + dir + "x_missing.obsk -o " + dir + "m.obsk"),
            static_cast<int>(ErrorCategory::io));
  ASSERT_EQ(run_cli("sketch -i " + dir + "cli_a.csv -o " + dir + "c.obsk" + common + "9"), 0);
  EXPECT_EQ(run_cli("merge " + dir + "a.obsk " + dir + "c.obsk -o " + dir + "m.obsk"),
            static_cast<int>(ErrorCategory::incompatible));
}
