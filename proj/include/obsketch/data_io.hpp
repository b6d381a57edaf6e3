#pragma once

// Datasets: label folding, l1 augmentation, the synthetic heavy-hitter and
// lower-bound instances, and dense CSV / svmlight IO.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "obsketch/errors.hpp"
#include "obsketch/sketch.hpp"

namespace obsketch {

struct Dataset {
  RowMatrix rows;
  std::optional<Vector> labels;  // +-1 when present
  std::optional<Vector> target;  // regression target Y
  bool folded = false;           // rows hold x_i = -y_i z_i
  bool augmented = false;        // rows hold (x_i, -y_i)
  std::string name;
  std::string provenance;
  bool labels_remapped = false;  // some 0 labels were mapped to -1
  bool intercept_added = false;

  std::uint64_t n() const { return static_cast<std::uint64_t>(rows.rows()); }
  std::uint64_t d() const { return static_cast<std::uint64_t>(rows.cols()); }
};

// ---------------------------------------------------------------------------
// Transformations

inline Dataset fold_labels(const RowMatrix& Z, const Vector& Y) {
  detail::require(Z.rows() == Y.size(), ErrorCategory::dimension_mismatch,
                  "fold_labels: label count does not match rows");
  Dataset out;
  out.rows = Z;
  for (Eigen::Index i = 0; i < Y.size(); ++i) {
    detail::require(Y[i] == 1.0 || Y[i] == -1.0, ErrorCategory::invalid_argument,
                    "fold_labels: label at row " + std::to_string(i) + " is not +-1");
    out.rows.row(i) *= -Y[i];
  }
  out.folded = true;
  return out;
}

inline Dataset fold_labels(const Dataset& ds) {
  detail::require(!ds.folded, ErrorCategory::invalid_argument, "fold_labels: dataset is already folded");
  detail::require(ds.labels.has_value(), ErrorCategory::invalid_argument, "fold_labels: dataset has no labels");
  Dataset out = fold_labels(ds.rows, *ds.labels);
  out.name = ds.name;
  out.provenance = ds.provenance + (ds.provenance.empty() ? "" : "; ") + "folded";
  out.labels_remapped = ds.labels_remapped;
  out.intercept_added = ds.intercept_added;
  return out;
}

inline Dataset augment_l1(const RowMatrix& X, const Vector& Y) {
  detail::require(X.rows() == Y.size(), ErrorCategory::dimension_mismatch,
                  "augment_l1: target length does not match rows");
  Dataset out;
  out.rows.resize(X.rows(), X.cols() + 1);
  out.rows.leftCols(X.cols()) = X;
  out.rows.col(X.cols()) = -Y;
  out.augmented = true;
  return out;
}

// Removes the -Y column of an augmented dataset.
inline RowMatrix strip_augmentation(const Dataset& ds) {
  detail::require(ds.augmented && ds.rows.cols() >= 1, ErrorCategory::invalid_argument,
                  "strip_augmentation: dataset is not augmented");
  return ds.rows.leftCols(ds.rows.cols() - 1);
}

// ---------------------------------------------------------------------------
// Generators (deterministic)

// Heavy-hitter instance with 2 n_half points in d dimensions, unfolded, with
// labels. `scale` is the magnitude of the heavy rows (defaults to n_half).
inline Dataset synthetic_heavy_raw(std::uint64_t n_half = 20000, std::uint64_t d = 100,
                                   std::optional<double> scale = std::nullopt) {
  detail::require(d >= 1 && n_half >= 10 * d, ErrorCategory::invalid_argument,
                  "gen_synthetic_heavy: need d >= 1 and n_half >= 10 d");
  const std::uint64_t n = n_half;
  const double big = scale.value_or(static_cast<double>(n));
  const std::uint64_t n_minus = n - n / 10 - 2 * d;
  const std::uint64_t n_plus = n / 10;
  const std::uint64_t total = n_minus + n_plus + d + d + n;

  Dataset ds;
  const auto D = static_cast<Eigen::Index>(d);
  ds.rows = RowMatrix::Zero(static_cast<Eigen::Index>(total), D);
  Vector labels = Vector::Constant(static_cast<Eigen::Index>(total), 1.0);
  Eigen::Index r = 0;
  for (std::uint64_t k = 0; k < n_minus; ++k) ds.rows.row(r++).setConstant(-1.0);
  for (std::uint64_t k = 0; k < n_plus; ++k) ds.rows.row(r++).setConstant(1.0);
  for (std::uint64_t k = 0; k < d; ++k) ds.rows.row(r++).setConstant(-big);
  for (std::uint64_t k = 0; k < d; ++k) ds.rows(r++, static_cast<Eigen::Index>(k)) = big;
  for (std::uint64_t k = 0; k < n; ++k) labels[r++] = -1.0;
  ds.labels = std::move(labels);
  ds.name = "synthetic_heavy";
  ds.provenance = "generated: synthetic_heavy n_half=" + std::to_string(n_half) + " d=" + std::to_string(d);
  return ds;
}

// Row range of the d heavy hitters (scale * e_i) in the generated instance.
inline std::pair<std::uint64_t, std::uint64_t> synthetic_heavy_hitter_rows(std::uint64_t n_half,
                                                                           std::uint64_t d) {
  const std::uint64_t first = (n_half - n_half / 10 - 2 * d) + n_half / 10 + d;
  return {first, first + d};
}

inline Dataset gen_synthetic_heavy(std::uint64_t n_half = 20000, std::uint64_t d = 100,
                                   std::optional<double> scale = std::nullopt) {
  return fold_labels(synthetic_heavy_raw(n_half, d, scale));
}

// One-dimensional lower-bound instance: one row sqrt(n), n - n/mu rows of -1
// and n/mu rows of +1 (n + 1 rows in total).
inline Dataset gen_lower_bound(std::uint64_t n, double mu) {
  detail::require(std::isfinite(mu) && mu > 10.0, ErrorCategory::invalid_argument,
                  "gen_lower_bound: mu must exceed 10");
  detail::require(n >= 1, ErrorCategory::invalid_argument, "gen_lower_bound: n must be positive");
  const auto n_plus = static_cast<std::uint64_t>(std::floor(static_cast<double>(n) / mu));
  const std::uint64_t n_minus = n - n_plus;
  Dataset ds;
  ds.rows.resize(static_cast<Eigen::Index>(n + 1), 1);
  ds.rows(0, 0) = std::sqrt(static_cast<double>(n));
  for (std::uint64_t i = 1; i <= n_minus; ++i) ds.rows(static_cast<Eigen::Index>(i), 0) = -1.0;
  for (std::uint64_t i = n_minus + 1; i <= n; ++i) ds.rows(static_cast<Eigen::Index>(i), 0) = 1.0;
  ds.folded = true;
  ds.name = "lower_bound";
  std::ostringstream prov;
  prov << "generated: lower_bound n=" << n << " mu=" << mu;
  ds.provenance = prov.str();
  return ds;
}

// l1 instance with an exact fit Y = X beta0, integer-valued X and beta0.
inline Dataset gen_exact_l1(std::uint64_t n, std::uint64_t d, std::uint64_t seed) {
  detail::require(n >= 1 && d >= 1, ErrorCategory::invalid_argument, "gen_exact_l1: n, d must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> entry(-5, 5);
  Dataset ds;
  ds.rows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < ds.rows.size(); ++i) ds.rows.data()[i] = entry(rng);
  Vector beta0(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < beta0.size(); ++j) beta0[j] = entry(rng);
  ds.target = ds.rows * beta0;
  ds.name = "exact_l1";
  ds.provenance = "generated: exact_l1 n=" + std::to_string(n) + " d=" + std::to_string(d) +
                  " seed=" + std::to_string(seed);
  return ds;
}

// ---------------------------------------------------------------------------
// File formats

enum class FileFormat { dense_csv, svmlight };

inline FileFormat parse_format(std::string_view s) {
  if (s == "csv" || s == "dense_csv") return FileFormat::dense_csv;
  if (s == "svmlight" || s == "libsvm") return FileFormat::svmlight;
  detail::fail(ErrorCategory::invalid_argument, "unknown file format '" + std::string(s) + "'");
}

enum class LabelKind { none, classes, regression };

struct LoadOptions {
  FileFormat format = FileFormat::dense_csv;
  LabelKind labels = LabelKind::classes;
  std::optional<bool> header;          // CSV: auto-detected when unset
  int label_column = -1;               // CSV: -1 selects the last column
  std::optional<std::uint64_t> num_features;  // svmlight: default max index
  bool add_intercept = false;
};

// One parsed input row handed to a streaming consumer.
struct ParsedRow {
  std::uint64_t index = 0;
  std::vector<std::uint64_t> cols;  // sparse column indices (0-based)
  std::vector<double> values;
  std::optional<double> label;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

[[noreturn]] inline void parse_fail(std::uint64_t line, const std::string& msg) {
  fail(ErrorCategory::parse, "line " + std::to_string(line) + ": " + msg);
}

// Maps a class label to +-1; 0 becomes -1 and sets `remapped`.
inline double class_label(double v, std::uint64_t line, bool& remapped) {
  if (v == 1.0 || v == -1.0) return v;
  if (v == 0.0) {
    remapped = true;
    return -1.0;
  }
  parse_fail(line, "label outside {-1, +1, 0, 1}");
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

struct StreamSummary {
  std::uint64_t rows = 0;
  std::uint64_t features = 0;  // dense column count / max svmlight index
  bool labels_remapped = false;
  std::vector<std::string> header;
};

// Streams the rows of a dataset file to `sink` in a single pass. Only one
// row is buffered at a time.
inline StreamSummary stream_rows(std::istream& in, const LoadOptions& opt,
                                 const std::function<void(const ParsedRow&)>& sink) {
  StreamSummary summary;
  std::string line;
  std::uint64_t lineno = 0;
  ParsedRow row;
  std::optional<std::size_t> width;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    row.cols.clear();
    row.values.clear();
    row.label.reset();

    if (opt.format == FileFormat::dense_csv) {
      const auto fields = detail::split(text, ',');
      if (!width) {
        double probe;
        const bool numeric = std::all_of(fields.begin(), fields.end(),
                                         [&](std::string_view f) { return detail::parse_double(f, probe); });
        const bool is_header = opt.header.value_or(!numeric);
        width = fields.size();
        if (is_header) {
          for (auto f : fields) summary.header.emplace_back(detail::trim(f));
          continue;
        }
      }
      if (fields.size() != *width) {
        detail::parse_fail(lineno, "expected " + std::to_string(*width) + " fields, found " +
                                       std::to_string(fields.size()));
      }
      const bool has_label = opt.labels != LabelKind::none;
      const std::size_t label_col =
          opt.label_column < 0 ? fields.size() - 1 : static_cast<std::size_t>(opt.label_column);
      if (has_label && label_col >= fields.size()) detail::parse_fail(lineno, "label column out of range");
      std::uint64_t c = 0;
      for (std::size_t k = 0; k < fields.size(); ++k) {
        double v;
        if (!detail::parse_double(fields[k], v)) detail::parse_fail(lineno, "malformed number in field " + std::to_string(k + 1));
        if (has_label && k == label_col) {
          row.label = opt.labels == LabelKind::classes ? detail::class_label(v, lineno, summary.labels_remapped) : v;
          continue;
        }
        row.cols.push_back(c++);
        row.values.push_back(v);
      }
      summary.features = c;
    } else {
      std::string_view body = text;
      if (const auto hash = body.find('#'); hash != std::string_view::npos) body = detail::trim(body.substr(0, hash));
      std::size_t pos = 0;
      auto next_token = [&]() -> std::string_view {
        while (pos < body.size() && (body[pos] == ' ' || body[pos] == '\t')) ++pos;
        const std::size_t start = pos;
        while (pos < body.size() && body[pos] != ' ' && body[pos] != '\t') ++pos;
        return body.substr(start, pos - start);
      };
      const std::string_view label_tok = next_token();
      double v;
      if (!detail::parse_double(label_tok, v)) detail::parse_fail(lineno, "malformed label");
      if (opt.labels == LabelKind::classes) {
        row.label = detail::class_label(v, lineno, summary.labels_remapped);
      } else if (opt.labels == LabelKind::regression) {
        row.label = v;
      }
      std::uint64_t last = 0;
      for (std::string_view tok = next_token(); !tok.empty(); tok = next_token()) {
        const auto colon = tok.find(':');
        if (colon == std::string_view::npos) detail::parse_fail(lineno, "malformed feature '" + std::string(tok) + "'");
        const std::string_view key = tok.substr(0, colon);
        if (key == "qid") continue;
        std::uint64_t idx = 0;
        const auto res = std::from_chars(key.data(), key.data() + key.size(), idx);
        if (res.ec != std::errc() || res.ptr != key.data() + key.size() || idx == 0) {
          detail::parse_fail(lineno, "malformed feature index '" + std::string(key) + "'");
        }
        if (idx <= last) detail::parse_fail(lineno, "feature indices must be increasing");
        last = idx;
        if (!detail::parse_double(tok.substr(colon + 1), v)) detail::parse_fail(lineno, "malformed feature value");
        if (opt.num_features && idx > *opt.num_features) detail::parse_fail(lineno, "feature index exceeds num_features");
        row.cols.push_back(idx - 1);
        row.values.push_back(v);
      }
      summary.features = std::max(summary.features, last);
    }
    row.index = summary.rows++;
    sink(row);
  }
  if (opt.format == FileFormat::svmlight && opt.num_features) summary.features = *opt.num_features;
  return summary;
}

inline Dataset load(const std::string& path, const LoadOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) detail::fail(ErrorCategory::io, "cannot open " + path);
  std::vector<ParsedRow> rows;
  const StreamSummary summary = stream_rows(in, opt, [&](const ParsedRow& r) { rows.push_back(r); });

  Dataset ds;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(summary.features);
  const Eigen::Index extra = opt.add_intercept ? 1 : 0;
  ds.rows = RowMatrix::Zero(n, d + extra);
  Vector labels(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ParsedRow& r = rows[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < r.cols.size(); ++k) ds.rows(i, static_cast<Eigen::Index>(r.cols[k])) = r.values[k];
    if (extra) ds.rows(i, d) = 1.0;
    if (r.label) labels[i] = *r.label;
  }
  if (opt.labels == LabelKind::classes) ds.labels = std::move(labels);
  if (opt.labels == LabelKind::regression) ds.target = std::move(labels);
  ds.labels_remapped = summary.labels_remapped;
  ds.intercept_added = opt.add_intercept;
  ds.name = path;
  ds.provenance = "loaded: " + path + (opt.format == FileFormat::svmlight ? " (svmlight)" : " (csv)") +
                  (opt.add_intercept ? "; intercept column added" : "") +
                  (summary.labels_remapped ? "; 0 labels remapped to -1" : "");
  return ds;
}

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace detail

// Writes features plus the label (or target) column, if any, last. Values
// use shortest round-trip formatting so load(write(ds)) is exact.
inline void write(std::ostream& out, const Dataset& ds, FileFormat format) {
  const std::optional<Vector>& y = ds.labels ? ds.labels : ds.target;
  std::string line;
  if (format == FileFormat::dense_csv) {
    for (Eigen::Index j = 0; j < ds.rows.cols(); ++j) {
      if (j) line += ',';
      line += "x" + std::to_string(j + 1);
    }
    if (y) line += ds.labels ? ",label" : ",target";
    out << line << '\n';
    for (Eigen::Index i = 0; i < ds.rows.rows(); ++i) {
      line.clear();
      for (Eigen::Index j = 0; j < ds.rows.cols(); ++j) {
        if (j) line += ',';
        detail::append_double(line, ds.rows(i, j));
      }
      if (y) {
        line += ',';
        detail::append_double(line, (*y)[i]);
      }
      out << line << '\n';
    }
  } else {
    for (Eigen::Index i = 0; i < ds.rows.rows(); ++i) {
      line.clear();
      detail::append_double(line, y ? (*y)[i] : 0.0);
      for (Eigen::Index j = 0; j < ds.rows.cols(); ++j) {
        if (ds.rows(i, j) == 0.0) continue;
        line += ' ';
        line += std::to_string(j + 1);
        line += ':';
        detail::append_double(line, ds.rows(i, j));
      }
      out << line << '\n';
    }
  }
}

inline void write(const std::string& path, const Dataset& ds, FileFormat format) {
  std::ofstream out(path);
  if (!out) detail::fail(ErrorCategory::io, "cannot open " + path + " for writing");
  write(out, ds, format);
  if (!out) detail::fail(ErrorCategory::io, "failed writing " + path);
}

}  // namespace obsketch
