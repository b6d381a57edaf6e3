#pragma once

// Experiment runner: a JSON spec names a dataset, an objective with a list
// of lambdas, methods and target sizes. Every (method, lambda, size, rep)
// becomes one record holding timings, objectives and the approximation ratio
// against the full-data fit.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "obsketch/baselines.hpp"
#include "obsketch/data_io.hpp"
#include "obsketch/errors.hpp"
#include "obsketch/hash.hpp"
#include "obsketch/objectives.hpp"
#include "obsketch/sketch.hpp"
#include "obsketch/solvers.hpp"

namespace obsketch {

inline constexpr const char* kResultsSchema = "obsketch-results/1";
inline constexpr const char* kSeedEnvVar = "OBSKETCH_SEED";

enum class MethodType { new_sketch, old_sketch, cauchy, uniform, sgd };

struct MethodSpec {
  MethodType type = MethodType::new_sketch;
  std::string label;
  std::uint64_t s = 1;
  std::optional<std::uint64_t> h_m;
  std::optional<double> b;
  std::optional<std::vector<std::uint64_t>> sizes;
  std::optional<std::uint64_t> repetitions;
  SgdParams sgd;
};

struct DatasetSpec {
  std::string generate;  // synthetic | lower_bound | exact_l1, or empty to load `path`
  std::uint64_t n_half = 20000;
  std::uint64_t d = 100;
  std::uint64_t n = 10000;
  double mu = 16.0;
  std::uint64_t seed = 0;
  std::string path;
  FileFormat format = FileFormat::dense_csv;
  bool intercept = true;
};

struct ExperimentSpec {
  DatasetSpec dataset;
  ObjectiveKind kind = ObjectiveKind::logistic;
  std::vector<double> lambdas{0.0};
  std::vector<MethodSpec> methods;
  std::vector<std::uint64_t> sizes;
  std::uint64_t repetitions = 40;
  std::uint64_t sgd_repetitions = 21;
  std::uint64_t h_m = 2;
  double b = 8.0;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
  std::string csv;
  std::string summary;
  std::string svg;
  bool svg_log_y = true;
};

struct ExperimentRecord {
  std::string method;
  std::uint64_t size = 0;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  double sketch_time_s = 0.0;
  double solve_time_s = 0.0;
  double objective_sketch_space = std::numeric_limits<double>::quiet_NaN();
  double objective_full_data = std::numeric_limits<double>::quiet_NaN();
  double approx_ratio = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

struct SummaryRow {
  std::string method;
  double lambda = 0.0;
  std::uint64_t size = 0;
  std::uint64_t count = 0;
  std::uint64_t failures = 0;
  double median_ratio = std::numeric_limits<double>::quiet_NaN();
  double median_sketch_time_s = std::numeric_limits<double>::quiet_NaN();
  double median_solve_time_s = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentResult {
  std::vector<ExperimentRecord> records;
  std::map<double, double> optimum;  // lambda -> full-data objective
  std::uint64_t n = 0;
  std::uint64_t d = 0;
};

// ---------------------------------------------------------------------------
// Spec parsing

inline std::string method_name(MethodType t) {
  switch (t) {
    case MethodType::new_sketch: return "new_sketch";
    case MethodType::old_sketch: return "old_sketch";
    case MethodType::cauchy: return "cauchy";
    case MethodType::uniform: return "uniform";
    case MethodType::sgd: return "sgd";
  }
  return "unknown";
}

inline MethodType parse_method_type(const std::string& s) {
  if (s == "new_sketch" || s == "sketch") return MethodType::new_sketch;
  if (s == "old_sketch") return MethodType::old_sketch;
  if (s == "cauchy") return MethodType::cauchy;
  if (s == "uniform") return MethodType::uniform;
  if (s == "sgd") return MethodType::sgd;
  detail::fail(ErrorCategory::invalid_argument, "experiment: unknown method type '" + s + "'");
}

namespace detail {

template <class T>
T json_get(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::invalid_argument, std::string("experiment: bad value for '") + key + "': " + e.what());
  }
}

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const char* where) {
  for (const auto& item : j.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; });
    if (!ok) fail(ErrorCategory::invalid_argument, std::string("experiment: unknown key '") + item.key() + "' in " + where);
  }
}

}  // namespace detail

inline void validate(const ExperimentSpec& spec) {
  using detail::require;
  constexpr auto bad = ErrorCategory::invalid_argument;
  require(!spec.methods.empty(), bad, "experiment: method list is empty");
  require(spec.repetitions >= 1 && spec.sgd_repetitions >= 1, bad, "experiment: repetitions must be >= 1");
  require(!spec.lambdas.empty(), bad, "experiment: lambda list is empty");
  for (double l : spec.lambdas) require(std::isfinite(l) && l >= 0.0, bad, "experiment: lambda must be >= 0");
  require(spec.kind != ObjectiveKind::l1 || spec.lambdas == std::vector<double>{0.0}, bad,
          "experiment: l1 objective takes no lambda");
  require(spec.h_m >= 1 && spec.b > 1.0, bad, "experiment: need h_m >= 1 and b > 1");
  require(!spec.dataset.generate.empty() || !spec.dataset.path.empty(), bad,
          "experiment: dataset needs 'generate' or 'path'");
  for (const MethodSpec& m : spec.methods) {
    require(m.s >= 1, bad, "experiment: s must be >= 1");
    if (m.type == MethodType::sgd) {
      require(spec.kind != ObjectiveKind::l1, bad, "experiment: sgd supports the logistic objective only");
      continue;
    }
    if (m.type == MethodType::cauchy) require(spec.kind == ObjectiveKind::l1, bad, "experiment: cauchy supports l1 only");
    const auto& sizes = m.sizes ? *m.sizes : spec.sizes;
    require(!sizes.empty(), bad, "experiment: method '" + m.label + "' has no sizes");
    for (std::uint64_t v : sizes) require(v >= 1, bad, "experiment: sizes must be >= 1");
  }
}

inline ExperimentSpec parse_experiment_spec(const nlohmann::json& j) {
  using detail::json_get;
  detail::require(j.is_object(), ErrorCategory::invalid_argument, "experiment: spec must be a JSON object");
  detail::check_keys(j, {"dataset", "objective", "methods", "sizes", "repetitions", "sgd_repetitions", "sketch", "seed",
                         "threads", "outputs"},
                     "spec");
  ExperimentSpec spec;
  if (j.contains("dataset")) {
    const auto& ds = j.at("dataset");
    detail::check_keys(ds, {"generate", "n_half", "d", "n", "mu", "seed", "path", "format", "intercept"}, "dataset");
    spec.dataset.generate = json_get<std::string>(ds, "generate", "");
    spec.dataset.n_half = json_get<std::uint64_t>(ds, "n_half", spec.dataset.n_half);
    spec.dataset.d = json_get<std::uint64_t>(ds, "d", spec.dataset.d);
    spec.dataset.n = json_get<std::uint64_t>(ds, "n", spec.dataset.n);
    spec.dataset.mu = json_get<double>(ds, "mu", spec.dataset.mu);
    spec.dataset.seed = json_get<std::uint64_t>(ds, "seed", spec.dataset.seed);
    spec.dataset.path = json_get<std::string>(ds, "path", "");
    spec.dataset.format = parse_format(json_get<std::string>(ds, "format", "csv"));
    spec.dataset.intercept = json_get<bool>(ds, "intercept", true);
  }
  if (j.contains("objective")) {
    const auto& ob = j.at("objective");
    detail::check_keys(ob, {"kind", "lambdas"}, "objective");
    const std::string kind = json_get<std::string>(ob, "kind", "logistic");
    if (kind == "logistic") spec.kind = ObjectiveKind::logistic;
    else if (kind == "l1") spec.kind = ObjectiveKind::l1;
    else detail::fail(ErrorCategory::invalid_argument, "experiment: unknown objective kind '" + kind + "'");
    spec.lambdas = json_get<std::vector<double>>(ob, "lambdas", {0.0});
  }
  spec.sizes = json_get<std::vector<std::uint64_t>>(j, "sizes", {});
  spec.repetitions = json_get<std::uint64_t>(j, "repetitions", spec.repetitions);
  spec.sgd_repetitions = json_get<std::uint64_t>(j, "sgd_repetitions", spec.sgd_repetitions);
  spec.seed = json_get<std::uint64_t>(j, "seed", spec.seed);
  spec.threads = json_get<unsigned>(j, "threads", 0u);
  if (j.contains("sketch")) {
    const auto& sk = j.at("sketch");
    detail::check_keys(sk, {"h_m", "b"}, "sketch");
    spec.h_m = json_get<std::uint64_t>(sk, "h_m", spec.h_m);
    spec.b = json_get<double>(sk, "b", spec.b);
  }
  if (j.contains("outputs")) {
    const auto& out = j.at("outputs");
    detail::check_keys(out, {"csv", "summary", "svg", "svg_log_y"}, "outputs");
    spec.csv = json_get<std::string>(out, "csv", "");
    spec.summary = json_get<std::string>(out, "summary", "");
    spec.svg = json_get<std::string>(out, "svg", "");
    spec.svg_log_y = json_get<bool>(out, "svg_log_y", true);
  }
  if (j.contains("methods")) {
    detail::require(j.at("methods").is_array(), ErrorCategory::invalid_argument, "experiment: 'methods' must be a list");
    for (const auto& mj : j.at("methods")) {
      detail::check_keys(mj, {"type", "label", "s", "h_m", "b", "sizes", "repetitions", "eta0", "batch"}, "method");
      MethodSpec m;
      m.type = parse_method_type(json_get<std::string>(mj, "type", ""));
      m.s = m.type == MethodType::old_sketch ? 1 : json_get<std::uint64_t>(mj, "s", 1);
      if (mj.contains("h_m")) m.h_m = json_get<std::uint64_t>(mj, "h_m", 1);
      if (mj.contains("b")) m.b = json_get<double>(mj, "b", 2.0);
      if (mj.contains("sizes")) m.sizes = json_get<std::vector<std::uint64_t>>(mj, "sizes", {});
      if (mj.contains("repetitions")) m.repetitions = json_get<std::uint64_t>(mj, "repetitions", 1);
      m.sgd.eta0 = json_get<double>(mj, "eta0", m.sgd.eta0);
      m.sgd.batch = json_get<std::uint64_t>(mj, "batch", m.sgd.batch);
      std::string def = method_name(m.type);
      if (m.type == MethodType::new_sketch) def = "sketch_s" + std::to_string(m.s);
      m.label = json_get<std::string>(mj, "label", def);
      spec.methods.push_back(std::move(m));
    }
  }
  if (const char* env = std::getenv(kSeedEnvVar)) {
    try {
      spec.seed = std::stoull(env);
    } catch (const std::exception&) {
      detail::fail(ErrorCategory::invalid_argument, std::string(kSeedEnvVar) + " is not an unsigned integer");
    }
  }
  validate(spec);
  return spec;
}

inline ExperimentSpec load_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) detail::fail(ErrorCategory::io, "cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    detail::fail(ErrorCategory::parse, path + ": " + e.what());
  }
  return parse_experiment_spec(j);
}

// ---------------------------------------------------------------------------
// Running

// The matrix the objective is evaluated on: folded rows for logistic,
// (x, -y) rows for l1.
inline RowMatrix prepare_problem(const DatasetSpec& ds, ObjectiveKind kind) {
  Dataset data;
  if (ds.generate == "synthetic") {
    data = kind == ObjectiveKind::l1 ? synthetic_heavy_raw(ds.n_half, ds.d) : gen_synthetic_heavy(ds.n_half, ds.d);
  } else if (ds.generate == "lower_bound") {
    data = gen_lower_bound(ds.n, ds.mu);
  } else if (ds.generate == "exact_l1") {
    data = gen_exact_l1(ds.n, ds.d, ds.seed);
  } else if (!ds.generate.empty()) {
    detail::fail(ErrorCategory::invalid_argument, "experiment: unknown generator '" + ds.generate + "'");
  } else {
    LoadOptions opt;
    opt.format = ds.format;
    opt.labels = kind == ObjectiveKind::l1 ? LabelKind::regression : LabelKind::classes;
    opt.add_intercept = ds.intercept;
    data = load(ds.path, opt);
  }
  if (kind == ObjectiveKind::l1) {
    if (data.augmented) return data.rows;
    const std::optional<Vector>& y = data.target ? data.target : data.labels;
    detail::require(y.has_value() && !data.folded, ErrorCategory::invalid_argument,
                    "experiment: l1 needs unfolded rows with a target");
    return augment_l1(data.rows, *y).rows;
  }
  if (data.folded) return data.rows;
  return fold_labels(data).rows;
}

inline std::uint64_t record_seed(std::uint64_t base, const std::string& method, std::uint64_t size, std::uint64_t rep) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : method) h = (h ^ c) * 0x100000001b3ULL;
  return keyed_hash(keyed_hash(base, h, size), rep, 0x52455053);
}

namespace detail {

struct Job {
  std::size_t method = 0;
  double lambda = 0.0;
  std::uint64_t size = 0;
  std::uint64_t rep = 0;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline FitResult fit_weighted(const RowMatrix& rows, const Vector& w, ObjectiveKind kind, double lambda,
                              double normalizer, std::uint64_t seed) {
  if (kind == ObjectiveKind::l1) return solve_l1(rows, w);
  LogisticOptions lo;
  lo.normalizer = normalizer;
  lo.seed = seed;
  return solve_logistic(rows, w, lambda, lo);
}

inline ExperimentRecord run_job(const ExperimentSpec& spec, const RowMatrix& X, const Job& job,
                                const std::map<double, double>& optimum) {
  const MethodSpec& m = spec.methods[job.method];
  ExperimentRecord rec;
  rec.method = m.label;
  rec.size = job.size;
  rec.lambda = job.lambda;
  rec.seed = record_seed(spec.seed, m.label, job.size, job.rep);
  const auto n = static_cast<std::uint64_t>(X.rows());
  const auto D = static_cast<std::uint64_t>(X.cols());
  const double normalizer = static_cast<double>(n);
  ObjectiveSpec ospec{spec.kind, job.lambda, normalizer};
  if (spec.kind == ObjectiveKind::logistic && job.lambda > 0.0) ospec.kind = ObjectiveKind::logistic_var_reg;
  try {
    FitResult fit;
    auto t0 = std::chrono::steady_clock::now();
    switch (m.type) {
      case MethodType::new_sketch:
      case MethodType::old_sketch: {
        BudgetOptions bo;
        bo.seed = rec.seed;
        const SketchConfig c = plan_budget(n, D, job.size, m.s, m.h_m.value_or(spec.h_m), m.b.value_or(spec.b), bo);
        const SketchState st = sketch_matrix(c, X);
        rec.sketch_time_s = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        fit = fit_weighted(st.buckets(), st.weights(), spec.kind, job.lambda, normalizer, rec.seed);
        break;
      }
      case MethodType::cauchy: {
        const WeightedRows sk = cauchy_sketch(X, job.size, rec.seed);
        rec.sketch_time_s = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        fit = fit_weighted(sk.rows, sk.weights, spec.kind, job.lambda, normalizer, rec.seed);
        break;
      }
      case MethodType::uniform: {
        const WeightedRows sk = uniform_sample(X, job.size, rec.seed);
        rec.sketch_time_s = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        fit = fit_weighted(sk.rows, sk.weights, spec.kind, job.lambda, normalizer, rec.seed);
        break;
      }
      case MethodType::sgd: {
        require(job.lambda == 0.0, ErrorCategory::invalid_argument, "sgd runs plain logistic regression only");
        rec.sketch_time_s = 0.0;
        fit = sgd_one_pass(X, m.sgd, rec.seed);
        break;
      }
    }
    rec.solve_time_s = seconds_since(t0);
    rec.objective_sketch_space = fit.objective;
    rec.objective_full_data = full_objective(X, ospec, fit.beta);
    rec.approx_ratio = approx_ratio(rec.objective_full_data, optimum.at(job.lambda));
    if (fit.diverged) rec.error = "diverged";
  } catch (const Error& e) {
    rec.error = std::string(category_name(e.category())) + ": " + e.what();
  }
  return rec;
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentSpec& spec, const RowMatrix& X) {
  validate(spec);
  ExperimentResult result;
  result.n = static_cast<std::uint64_t>(X.rows());
  result.d = static_cast<std::uint64_t>(X.cols());
  for (double lambda : spec.lambdas) {
    if (spec.kind == ObjectiveKind::l1) {
      result.optimum[lambda] = solve_l1(X, Vector::Ones(X.rows())).objective;
    } else {
      LogisticOptions lo;
      lo.seed = spec.seed;
      result.optimum[lambda] = solve_logistic(X, Vector::Ones(X.rows()), lambda, lo).objective;
    }
  }

  std::vector<detail::Job> jobs;
  for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
    const MethodSpec& m = spec.methods[mi];
    const bool sgd = m.type == MethodType::sgd;
    const std::vector<std::uint64_t> sizes = sgd ? std::vector<std::uint64_t>{result.n} : (m.sizes ? *m.sizes : spec.sizes);
    const std::uint64_t reps = m.repetitions.value_or(sgd ? spec.sgd_repetitions : spec.repetitions);
    for (double lambda : spec.lambdas) {
      for (std::uint64_t size : sizes) {
        for (std::uint64_t rep = 0; rep < reps; ++rep) jobs.push_back({mi, lambda, size, rep});
      }
    }
  }

  result.records.resize(jobs.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(spec.threads == 0 ? hw : spec.threads, static_cast<unsigned>(jobs.size()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      result.records[k] = detail::run_job(spec, X, jobs[k], result.optimum);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return result;
}

inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  return run_experiment(spec, prepare_problem(spec.dataset, spec.kind));
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else if (c == '\n') out += ' ';
    else out += c;
  }
  return out + "\"";
}

}  // namespace detail

// Records with an error other than "diverged" do not enter the medians.
inline std::vector<SummaryRow> summarize(const std::vector<ExperimentRecord>& records) {
  std::vector<SummaryRow> rows;
  std::map<std::tuple<std::string, double, std::uint64_t>, std::size_t> index;
  std::vector<std::vector<const ExperimentRecord*>> groups;
  for (const ExperimentRecord& r : records) {
    const auto key = std::make_tuple(r.method, r.lambda, r.size);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rows.size()).first;
      SummaryRow s;
      s.method = r.method;
      s.lambda = r.lambda;
      s.size = r.size;
      rows.push_back(s);
      groups.emplace_back();
    }
    groups[it->second].push_back(&r);
  }
  for (std::size_t g = 0; g < rows.size(); ++g) {
    std::vector<double> ratio;
    std::vector<double> st;
    std::vector<double> so;
    for (const ExperimentRecord* r : groups[g]) {
      ++rows[g].count;
      if (!r->error.empty() && r->error != "diverged") {
        ++rows[g].failures;
        continue;
      }
      ratio.push_back(r->approx_ratio);
      st.push_back(r->sketch_time_s);
      so.push_back(r->solve_time_s);
    }
    rows[g].median_ratio = detail::median_of(ratio);
    rows[g].median_sketch_time_s = detail::median_of(st);
    rows[g].median_solve_time_s = detail::median_of(so);
  }
  return rows;
}

inline void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
  out << "# schema: " << kResultsSchema << '\n';
  out << "method,size,seed,lambda,sketch_time_s,solve_time_s,objective_sketch_space,objective_full_data,approx_ratio,error\n";
  out << std::setprecision(17);
  for (const ExperimentRecord& r : records) {
    out << detail::csv_field(r.method) << ',' << r.size << ',' << r.seed << ',' << r.lambda << ',' << r.sketch_time_s << ','
        << r.solve_time_s << ',' << r.objective_sketch_space << ',' << r.objective_full_data << ',' << r.approx_ratio << ','
        << detail::csv_field(r.error) << '\n';
  }
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "# schema: " << kResultsSchema << '\n';
  out << "method,lambda,size,count,failures,median_ratio,median_sketch_time_s,median_solve_time_s\n";
  out << std::setprecision(17);
  for (const SummaryRow& s : rows) {
    out << detail::csv_field(s.method) << ',' << s.lambda << ',' << s.size << ',' << s.count << ',' << s.failures << ','
        << s.median_ratio << ',' << s.median_sketch_time_s << ',' << s.median_solve_time_s << '\n';
  }
}

// Line plot of median ratio against size, one series per (method, lambda).
inline void write_svg(std::ostream& out, const std::vector<SummaryRow>& rows, bool log_y, const std::string& title = "") {
  constexpr double W = 720, H = 440, L = 70, R = 190, T = 40, B = 50;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const SummaryRow& s : rows) {
    if (!std::isfinite(s.median_ratio) || (log_y && s.median_ratio <= 0.0)) continue;
    std::ostringstream name;
    name << s.method;
    if (s.lambda != 0.0) name << " lambda=" << s.lambda;
    const double x = static_cast<double>(s.size);
    const double y = log_y ? std::log10(s.median_ratio) : s.median_ratio;
    series[name.str()].emplace_back(x, y);
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  if (series.empty()) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
  static const char* colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) out << "<text x=\"" << L << "\" y=\"24\" font-size=\"14\">" << title << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = ymin + (ymax - ymin) * k / 4.0;
    const double xv = xmin + (xmax - xmin) * k / 4.0;
    out << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << std::setprecision(3)
        << (log_y ? std::pow(10.0, yv) : yv) << "</text>\n";
    out << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << std::setprecision(6) << xv
        << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">target size</text>\n";
  out << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
      << ")\" text-anchor=\"middle\">median approximation ratio" << (log_y ? " (log)" : "") << "</text>\n";
  std::size_t ci = 0;
  for (auto& [name, pts] : series) {
    std::sort(pts.begin(), pts.end());
    const char* color = colors[ci % 8];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) out << std::setprecision(8) << px(x) << ',' << py(y) << ' ';
    out << "\"/>\n";
    for (const auto& [x, y] : pts) out << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(ci);
    out << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 32 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << W - R + 38 << "\" y=\"" << ly + 4 << "\">" << name << "</text>\n";
    ++ci;
  }
  out << "</svg>\n";
}

// Writes whichever outputs the spec names.
inline void write_outputs(const ExperimentSpec& spec, const ExperimentResult& result) {
  auto open = [](const std::string& path) {
    std::ofstream f(path);
    if (!f) detail::fail(ErrorCategory::io, "cannot open " + path + " for writing");
    return f;
  };
  if (!spec.csv.empty()) {
    auto f = open(spec.csv);
    write_records_csv(f, result.records);
  }
  const std::vector<SummaryRow> summary = summarize(result.records);
  if (!spec.summary.empty()) {
    auto f = open(spec.summary);
    write_summary_csv(f, summary);
  }
  if (!spec.svg.empty()) {
    auto f = open(spec.svg);
    write_svg(f, summary, spec.svg_log_y);
  }
}

}  // namespace obsketch
