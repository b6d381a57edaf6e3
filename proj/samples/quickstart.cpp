// Sketch the synthetic heavy-hitter data in two shards, merge, and compare
// the logistic fit on the sketch with the fit on the full data.

#include <iostream>

#include "obsketch/obsketch.hpp"

int main() {
  using namespace obsketch;
  const Dataset ds = gen_synthetic_heavy(5000, 20);
  const RowMatrix& X = ds.rows;
  const auto n = ds.n();

  const SketchConfig config = plan_budget(n, ds.d(), 1200, 10, 1, 2.0, BudgetOptions{42});
  const Eigen::Index half = X.rows() / 2;
  SketchState a = sketch_shard(config, X.topRows(half), 0);
  const SketchState b = sketch_shard(config, X.bottomRows(X.rows() - half), static_cast<std::uint64_t>(half));
  a.merge_from(b);

  LogisticOptions opt;
  opt.normalizer = static_cast<double>(n);
  const FitResult on_sketch = solve_logistic(a.buckets(), a.weights(), 0.0, opt);
  const FitResult full = solve_logistic(X, Vector::Ones(X.rows()), 0.0);
  const double sketched = full_objective(X, ObjectiveSpec{ObjectiveKind::logistic, 0.0}, on_sketch.beta);

  std::cout << "sketch rows       " << a.rows() << " of " << n << '\n'
            << "full optimum      " << full.objective << '\n'
            << "sketch solution   " << sketched << '\n'
            << "ratio             " << approx_ratio(sketched, full.objective) << '\n';
}
