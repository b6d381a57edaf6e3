// obsketch command-line tool: build, merge and solve sketches, run
// experiments, estimate mu, generate datasets and run probes.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "obsketch/obsketch.hpp"

namespace {

using namespace obsketch;
using nlohmann::json;

struct InputFlags {
  std::string path;
  std::string format = "csv";
  std::string labels = "classes";
  std::optional<std::uint64_t> num_features;
  bool intercept = false;
  bool no_header = false;

  void add(CLI::App* cmd) {
    cmd->add_option("-i,--input", path, "Input dataset file")->required();
    cmd->add_option("--format", format, "csv | svmlight")->capture_default_str();
    cmd->add_option("--labels", labels, "classes | regression | none (none: rows used as given)")->capture_default_str();
    cmd->add_option("--num-features", num_features, "svmlight: number of feature columns");
    cmd->add_flag("--intercept", intercept, "Append a constant-1 feature column");
    cmd->add_flag("--no-header", no_header, "CSV: the first line is data");
  }

  LoadOptions options() const {
    LoadOptions opt;
    opt.format = parse_format(format);
    if (labels == "classes") opt.labels = LabelKind::classes;
    else if (labels == "regression") opt.labels = LabelKind::regression;
    else if (labels == "none") opt.labels = LabelKind::none;
    else detail::fail(ErrorCategory::invalid_argument, "unknown --labels value '" + labels + "'");
    if (no_header) opt.header = false;
    opt.num_features = num_features;
    opt.add_intercept = intercept;
    return opt;
  }
};

ObjectiveKind parse_objective(const std::string& s) {
  if (s == "logistic") return ObjectiveKind::logistic;
  if (s == "l1") return ObjectiveKind::l1;
  detail::fail(ErrorCategory::invalid_argument, "unknown objective '" + s + "'");
}

// Problem matrix for an objective: folded rows for logistic, (x, -y) for l1.
RowMatrix problem_matrix(const Dataset& ds, ObjectiveKind kind) {
  if (kind == ObjectiveKind::l1) {
    if (ds.augmented) return ds.rows;
    const std::optional<Vector>& y = ds.target ? ds.target : ds.labels;
    detail::require(y.has_value(), ErrorCategory::invalid_argument, "l1 needs a target column (--labels regression)");
    return augment_l1(ds.rows, *y).rows;
  }
  if (ds.folded || !ds.labels) return ds.rows;
  return fold_labels(ds).rows;
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json config_json(const SketchConfig& c) {
  return json{{"n", c.n},   {"d", c.d},       {"h_m", c.h_m},   {"N", c.N},
              {"N0", c.N0}, {"s", c.s},       {"b", c.b},       {"N_u", c.N_u},
              {"p_u", c.p_u}, {"seed", c.seed}, {"random_shift", c.random_shift}, {"shift_k", c.shift_k},
              {"mode", c.mode == PlanMode::theory ? "theory" : "budget"}, {"rows", c.rows()}};
}

// ---------------------------------------------------------------------------
// sketch

struct SketchFlags {
  InputFlags in;
  std::string output;
  std::string objective = "logistic";
  std::string mode = "budget";
  std::optional<std::uint64_t> n;
  std::uint64_t first_row = 0;
  std::uint64_t target_rows = 0;
  std::uint64_t s = 1;
  std::uint64_t h_m = 2;
  double b = 8.0;
  double eps = 0.25;
  double delta = 0.1;
  double mu = 2.0;
  double C = 1.0;
  std::optional<std::uint64_t> level0;
  std::uint64_t seed = 0;
  bool random_shift = false;
  std::uint64_t shift_k = 4;
};

std::uint64_t count_rows(const std::string& path, const LoadOptions& opt) {
  std::ifstream f(path);
  if (!f) detail::fail(ErrorCategory::io, "cannot open " + path);
  return stream_rows(f, opt, [](const ParsedRow&) {}).rows;
}

int cmd_sketch(const SketchFlags& f) {
  const LoadOptions opt = f.in.options();
  const ObjectiveKind kind = parse_objective(f.objective);
  const std::uint64_t n = f.n ? *f.n : f.first_row + count_rows(f.in.path, opt);

  std::ifstream file(f.in.path);
  if (!file) detail::fail(ErrorCategory::io, "cannot open " + f.in.path);
  std::optional<SketchState> state;
  std::vector<double> dense;
  std::uint64_t width = 0;
  auto make_state = [&](std::uint64_t features) {
    width = features + (opt.add_intercept ? 1 : 0);
    const std::uint64_t D = width + (kind == ObjectiveKind::l1 ? 1 : 0);
    SketchConfig c;
    if (f.mode == "budget") {
      BudgetOptions bo{f.seed, f.random_shift, f.shift_k};
      c = plan_budget(n, D, f.target_rows, f.s, f.h_m, f.b, bo);
    } else if (f.mode == "theory") {
      TheoryOptions to;
      to.C = f.C;
      if (f.s > 1) to.s = f.s;
      to.level0_buckets = f.level0;
      to.seed = f.seed;
      to.random_shift = f.random_shift;
      to.shift_k = f.shift_k;
      c = plan_theory(n, D, f.eps, f.delta, f.mu, to);
    } else {
      detail::fail(ErrorCategory::invalid_argument, "unknown --mode '" + f.mode + "'");
    }
    state.emplace(c);
    dense.assign(D, 0.0);
  };
  if (opt.format == FileFormat::svmlight) {
    detail::require(opt.num_features.has_value(), ErrorCategory::invalid_argument,
                    "sketching svmlight input needs --num-features");
    make_state(*opt.num_features);
  }

  stream_rows(file, opt, [&](const ParsedRow& r) {
    if (!state) make_state(r.cols.size());
    std::fill(dense.begin(), dense.end(), 0.0);
    for (std::size_t k = 0; k < r.cols.size(); ++k) dense[r.cols[k]] = r.values[k];
    if (opt.add_intercept) dense[width - 1] = 1.0;
    if (kind == ObjectiveKind::l1) {
      detail::require(r.label.has_value(), ErrorCategory::invalid_argument, "l1 sketch needs a target column");
      dense[width] = -*r.label;
    } else if (r.label) {
      for (std::uint64_t j = 0; j < width; ++j) dense[j] *= -*r.label;
    }
    state->update(f.first_row + r.index, std::span<const double>(dense));
  });
  detail::require(state.has_value(), ErrorCategory::invalid_argument, "input has no data rows");
  write_sketch_file(f.output, *state);
  print_json(json{{"output", f.output}, {"config", config_json(state->config())}});
  return 0;
}

// ---------------------------------------------------------------------------
// solve

int cmd_solve(const std::string& sketch_path, const InputFlags& in, const std::string& objective, double lambda,
              std::uint64_t seed) {
  const ObjectiveKind kind = parse_objective(objective);
  FitResult fit;
  json extra;
  if (!sketch_path.empty()) {
    const SketchState st = read_sketch_file(sketch_path);
    if (kind == ObjectiveKind::l1) {
      fit = solve_l1(st.buckets(), st.weights());
    } else {
      LogisticOptions lo;
      lo.normalizer = static_cast<double>(st.n_original());
      lo.seed = seed;
      fit = solve_logistic(st.buckets(), st.weights(), lambda, lo);
    }
    extra["sketch_rows"] = st.rows();
  } else {
    const Dataset ds = load(in.path, in.options());
    const RowMatrix X = problem_matrix(ds, kind);
    if (kind == ObjectiveKind::l1) {
      fit = solve_l1(X, Vector::Ones(X.rows()));
    } else {
      LogisticOptions lo;
      lo.seed = seed;
      fit = solve_logistic(X, Vector::Ones(X.rows()), lambda, lo);
    }
    extra["rows"] = X.rows();
  }
  json out{{"objective", fit.objective},   {"beta", to_std(fit.beta)},       {"iterations", fit.iterations},
           {"converged", fit.converged},   {"diverged", fit.diverged},       {"stalled", fit.stalled},
           {"restarts_used", fit.restarts_used}, {"ridge_events", fit.ridge_events}};
  out.update(extra);
  print_json(out);
  return 0;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateFlags {
  std::string kind;
  std::string output;
  std::string format = "csv";
  std::uint64_t n_half = 20000;
  std::uint64_t d = 100;
  std::uint64_t n = 10000;
  double mu = 16.0;
  std::uint64_t seed = 0;
  bool unfolded = false;
};

int cmd_generate(const GenerateFlags& f) {
  Dataset ds;
  if (f.kind == "synthetic") {
    ds = f.unfolded ? synthetic_heavy_raw(f.n_half, f.d) : gen_synthetic_heavy(f.n_half, f.d);
  } else if (f.kind == "lower-bound") {
    ds = gen_lower_bound(f.n, f.mu);
  } else if (f.kind == "exact-l1") {
    ds = gen_exact_l1(f.n, f.d, f.seed);
  } else {
    detail::fail(ErrorCategory::invalid_argument, "unknown generator '" + f.kind + "'");
  }
  if (ds.folded) ds.labels.reset();  // folded rows carry their labels
  write(f.output, ds, parse_format(f.format));
  print_json(json{{"output", f.output}, {"rows", ds.n()}, {"columns", ds.d()}, {"folded", ds.folded},
                  {"provenance", ds.provenance}});
  return 0;
}

// ---------------------------------------------------------------------------
// mu-estimate

int cmd_mu(const InputFlags& in, std::uint64_t directions, std::uint64_t refine, std::uint64_t seed) {
  const Dataset ds = load(in.path, in.options());
  const RowMatrix X = problem_matrix(ds, ObjectiveKind::logistic);
  const MuEstimate est = estimate_mu(X, directions, seed, refine);
  print_json(json{{"mu1_lower_bound", est.mu1_lb},
                  {"mu2_lower_bound", est.mu2_lb},
                  {"directions_tried", est.directions_tried},
                  {"separable", est.separable},
                  {"best_direction", to_std(est.best_direction)}});
  return 0;
}

// ---------------------------------------------------------------------------
// probe

struct ProbeFlags {
  InputFlags in;
  std::string output;
  double eps = 0.25;
  double delta = 0.1;
  double mu = 2.0;
  double C = 1.0;
  std::optional<std::uint64_t> s;
  std::optional<std::uint64_t> level0;
  std::uint64_t betas = 20;
  std::uint64_t seeds = 100;
  std::uint64_t seed = 0;
};

int cmd_probe(const ProbeFlags& f) {
  const Dataset ds = load(f.in.path, f.in.options());
  const RowMatrix X = problem_matrix(ds, ObjectiveKind::logistic);
  TheoryOptions to;
  to.C = f.C;
  to.s = f.s;
  to.level0_buckets = f.level0;
  const SketchConfig c = plan_theory(static_cast<std::uint64_t>(X.rows()), static_cast<std::uint64_t>(X.cols()), f.eps,
                                     f.delta, f.mu, to);
  std::mt19937_64 rng(f.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd B(X.cols(), static_cast<Eigen::Index>(f.betas));
  for (Eigen::Index k = 0; k < B.size(); ++k) B.data()[k] = gauss(rng);
  const ProbeReport rep = measure_contraction_dilation(X, c, B, f.seeds, f.seed);
  std::ofstream out(f.output);
  if (!out) detail::fail(ErrorCategory::io, "cannot open " + f.output + " for writing");
  write_probe_csv(out, rep);
  print_json(json{{"output", f.output}, {"sketch_rows", rep.sketch_rows}, {"config", config_json(c)}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oblivious sketching for logistic and l1 regression.\n"
               "Environment: " + std::string(kSeedEnvVar) + " overrides the base seed of experiment specs."};
  app.require_subcommand(1);

  SketchFlags sk;
  auto* c_sketch = app.add_subcommand("sketch", "Stream a dataset into a sketch file");
  sk.in.add(c_sketch);
  c_sketch->add_option("-o,--output", sk.output, "Sketch file to write")->required();
  c_sketch->add_option("--objective", sk.objective, "logistic (rows folded by label) | l1 (rows (x, -y))")
      ->capture_default_str();
  c_sketch->add_option("--mode", sk.mode, "budget | theory")->capture_default_str();
  c_sketch->add_option("--n", sk.n, "Row-domain size (default: first-row + rows in file, needs a counting pass)");
  c_sketch->add_option("--first-row", sk.first_row, "Global index of the file's first row (sharding)");
  c_sketch->add_option("--target-rows", sk.target_rows, "budget: total sketch rows");
  c_sketch->add_option("--s", sk.s, "Level-0 sparsity")->capture_default_str();
  c_sketch->add_option("--h-m", sk.h_m, "budget: index of the uniform level")->capture_default_str();
  c_sketch->add_option("--b", sk.b, "budget: branching factor")->capture_default_str();
  c_sketch->add_option("--eps", sk.eps, "theory: accuracy")->capture_default_str();
  c_sketch->add_option("--delta", sk.delta, "theory: failure probability")->capture_default_str();
  c_sketch->add_option("--mu", sk.mu, "theory: mu bound")->capture_default_str();
  c_sketch->add_option("--C", sk.C, "theory: constant in m1")->capture_default_str();
  c_sketch->add_option("--level0", sk.level0, "theory: level-0 buckets (default min(N, n/8))");
  c_sketch->add_option("--seed", sk.seed, "Sketch seed")->capture_default_str();
  c_sketch->add_flag("--random-shift", sk.random_shift, "Draw N0 from a geometric grid");
  c_sketch->add_option("--shift-k", sk.shift_k, "Grid size for --random-shift")->capture_default_str();

  std::vector<std::string> merge_inputs;
  std::string merge_output;
  auto* c_merge = app.add_subcommand("merge", "Add sketch files built with the same config");
  c_merge->add_option("inputs", merge_inputs, "Sketch files")->required()->expected(2, -1);
  c_merge->add_option("-o,--output", merge_output, "Merged sketch file")->required();

  InputFlags solve_in;
  std::string solve_sketch;
  std::string solve_objective = "logistic";
  double solve_lambda = 0.0;
  std::uint64_t solve_seed = 0;
  auto* c_solve = app.add_subcommand("solve", "Fit on a sketch file or on a dataset");
  c_solve->add_option("--sketch", solve_sketch, "Sketch file");
  c_solve->add_option("-i,--input", solve_in.path, "Dataset file");
  c_solve->add_option("--format", solve_in.format, "csv | svmlight")->capture_default_str();
  c_solve->add_option("--labels", solve_in.labels, "classes | regression | none")->capture_default_str();
  c_solve->add_option("--num-features", solve_in.num_features, "svmlight: number of features");
  c_solve->add_flag("--intercept", solve_in.intercept, "Append a constant-1 column");
  c_solve->add_option("--objective", solve_objective, "logistic | l1")->capture_default_str();
  c_solve->add_option("--lambda", solve_lambda, "Variance regularization weight")->capture_default_str();
  c_solve->add_option("--seed", solve_seed, "Restart seed")->capture_default_str();

  std::string spec_path;
  std::optional<unsigned> exp_threads;
  std::string exp_csv, exp_summary, exp_svg;
  auto* c_exp = app.add_subcommand("experiment", "Run an experiment spec (JSON)");
  c_exp->add_option("spec", spec_path, "Spec file")->required();
  c_exp->add_option("--threads", exp_threads, "Worker threads (default: spec or hardware)");
  c_exp->add_option("--csv", exp_csv, "Override outputs.csv");
  c_exp->add_option("--summary", exp_summary, "Override outputs.summary");
  c_exp->add_option("--svg", exp_svg, "Override outputs.svg");

  InputFlags mu_in;
  mu_in.labels = "none";
  std::uint64_t mu_dirs = 1000;
  std::uint64_t mu_refine = 20;
  std::uint64_t mu_seed = 0;
  auto* c_mu = app.add_subcommand("mu-estimate", "Lower bounds on mu_1 and mu_2 by direction search");
  mu_in.add(c_mu);
  c_mu->add_option("--directions", mu_dirs, "Random directions")->capture_default_str();
  c_mu->add_option("--refine", mu_refine, "Local refinement rounds")->capture_default_str();
  c_mu->add_option("--seed", mu_seed, "Direction seed")->capture_default_str();

  GenerateFlags gen;
  auto* c_gen = app.add_subcommand("generate", "Write a generated dataset");
  c_gen->add_option("kind", gen.kind, "synthetic | lower-bound | exact-l1")->required();
  c_gen->add_option("-o,--output", gen.output, "Output file")->required();
  c_gen->add_option("--format", gen.format, "csv | svmlight")->capture_default_str();
  c_gen->add_option("--n-half", gen.n_half, "synthetic: half the row count")->capture_default_str();
  c_gen->add_option("--d", gen.d, "synthetic / exact-l1: columns")->capture_default_str();
  c_gen->add_option("--n", gen.n, "lower-bound / exact-l1: rows")->capture_default_str();
  c_gen->add_option("--mu", gen.mu, "lower-bound: mu (> 10)")->capture_default_str();
  c_gen->add_option("--seed", gen.seed, "exact-l1: seed")->capture_default_str();
  c_gen->add_flag("--unfolded", gen.unfolded, "synthetic: write raw rows with +-1 labels");

  ProbeFlags pr;
  pr.in.labels = "none";
  auto* c_probe = app.add_subcommand("probe", "Contraction / dilation of the positive part over seeds");
  pr.in.add(c_probe);
  c_probe->add_option("-o,--output", pr.output, "Report CSV")->required();
  c_probe->add_option("--eps", pr.eps, "Theory-mode accuracy")->capture_default_str();
  c_probe->add_option("--delta", pr.delta, "Theory-mode failure probability")->capture_default_str();
  c_probe->add_option("--mu", pr.mu, "Theory-mode mu")->capture_default_str();
  c_probe->add_option("--C", pr.C, "Constant in m1")->capture_default_str();
  c_probe->add_option("--s", pr.s, "Level-0 sparsity override");
  c_probe->add_option("--level0", pr.level0, "Level-0 buckets override");
  c_probe->add_option("--betas", pr.betas, "Random test directions")->capture_default_str();
  c_probe->add_option("--seeds", pr.seeds, "Sketch seeds")->capture_default_str();
  c_probe->add_option("--seed", pr.seed, "Base seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*c_sketch) return cmd_sketch(sk);
    if (*c_merge) {
      SketchState acc = read_sketch_file(merge_inputs.front());
      for (std::size_t k = 1; k < merge_inputs.size(); ++k) acc.merge_from(read_sketch_file(merge_inputs[k]));
      write_sketch_file(merge_output, acc);
      print_json(json{{"output", merge_output}, {"inputs", merge_inputs.size()}, {"rows", acc.rows()}});
      return 0;
    }
    if (*c_solve) {
      detail::require(solve_sketch.empty() != solve_in.path.empty(), ErrorCategory::invalid_argument,
                      "solve needs exactly one of --sketch or --input");
      return cmd_solve(solve_sketch, solve_in, solve_objective, solve_lambda, solve_seed);
    }
    if (*c_exp) {
      ExperimentSpec spec = load_experiment_spec(spec_path);
      if (exp_threads) spec.threads = *exp_threads;
      if (!exp_csv.empty()) spec.csv = exp_csv;
      if (!exp_summary.empty()) spec.summary = exp_summary;
      if (!exp_svg.empty()) spec.svg = exp_svg;
      const ExperimentResult res = run_experiment(spec);
      write_outputs(spec, res);
      if (spec.summary.empty()) write_summary_csv(std::cout, summarize(res.records));
      return 0;
    }
    if (*c_mu) return cmd_mu(mu_in, mu_dirs, mu_refine, mu_seed);
    if (*c_gen) return cmd_generate(gen);
    if (*c_probe) return cmd_probe(pr);
  } catch (const Error& e) {
    std::cerr << "error: " << category_name(e.category()) << ": " << e.what() << '\n';
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
