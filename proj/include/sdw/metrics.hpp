#pragma once

// Lifelong-learning metrics over an evaluation matrix r[task][segment], where
// column 0 is the pre-training evaluation and column j the evaluation right after
// segment j. Segments are flattened across rounds: n is the number of segments and
// "task i" in the formulas is the task trained in segment i.
//
//   P = 1/n       sum_{j=1..n}   1/j     sum_{i<=j} r(i, j)
//   F = 1/(n-1)   sum_{j=2..n}   1/(j-1) sum_{i<j}  (r(i, j-1) - r(i, j)) / |rmax_i|
//   T = 1/(n-1)   sum_{j=1..n-1} 1/(n-j) sum_{i>j}  (r(i, j) - r(i, j-1)) / |rmax_i|
//
// T's j = n term has an empty sum and a zero divisor; it is dropped and the outer
// average taken over the remaining n - 1 terms. Tasks with |rmax| == 0 contribute
// nothing to F and T (a warning is emitted); the divisors are unchanged.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sdw/errors.hpp"

namespace sdw {

struct EvalMatrix {
  // r[task][column], columns 0..n_segments.
  std::vector<std::vector<double>> r;
  // segment_task[k] = task index trained in segment k + 1.
  std::vector<int> segment_task;
  // Optional per-task maximum over every recorded evaluation (including intermediate ones).
  // Empty means "max over r".
  std::vector<double> all_max;

  std::size_t n_tasks() const { return r.size(); }
  std::size_t n_segments() const { return segment_task.size(); }

  /// Single-round matrix: segment k trains task k.
  static EvalMatrix sequential(std::vector<std::vector<double>> r) {
    EvalMatrix m;
    m.segment_task.resize(r.empty() ? 0 : r.front().size() - 1);
    for (std::size_t k = 0; k < m.segment_task.size(); ++k)
      m.segment_task[k] = static_cast<int>(k % std::max<std::size_t>(1, r.size()));
    m.r = std::move(r);
    return m;
  }

  double max_performance(std::size_t task) const {
    if (!all_max.empty()) return all_max.at(task);
    return *std::max_element(r.at(task).begin(), r.at(task).end());
  }

  /// r for the task trained in (1-based) segment i, evaluated at column j.
  double at_segment_task(std::size_t i, std::size_t j) const {
    return r[static_cast<std::size_t>(segment_task[i - 1])][j];
  }

  void validate() const {
    if (r.empty() || segment_task.empty()) throw UsageError("EvalMatrix: empty matrix");
    for (const auto& row : r)
      if (row.size() != segment_task.size() + 1)
        throw UsageError("EvalMatrix: every row needs n_segments + 1 columns (including the pre-training column)");
    for (int t : segment_task)
      if (t < 0 || static_cast<std::size_t>(t) >= r.size()) throw UsageError("EvalMatrix: segment task out of range");
    if (!all_max.empty() && all_max.size() != r.size()) throw UsageError("EvalMatrix: all_max size mismatch");
  }
};

struct SegmentBreakdown {
  std::size_t segment = 0;
  double performance = 0.0;       // 1/j sum_{i<=j} r(i, j)
  double forgetting = 0.0;        // inner F average (segments >= 2)
  double transfer = 0.0;          // inner T average (segments <= n - 1)
};

struct MetricsReport {
  double P = 0.0;
  double F = 0.0;
  double T = 0.0;
  std::vector<SegmentBreakdown> per_segment;
};

namespace detail {

// Normalizer for the task trained in segment i, or 0 when it must be skipped.
inline double normalizer(const EvalMatrix& m, std::size_t i, std::vector<char>& warned) {
  const auto task = static_cast<std::size_t>(m.segment_task[i - 1]);
  const double mx = std::abs(m.max_performance(task));
  if (mx == 0.0 && !warned[task]) {
    warned[task] = 1;
    warn("task " + std::to_string(task) + " has zero maximum performance; its F/T terms are skipped");
  }
  return mx;
}

inline double performance_inner(const EvalMatrix& m, std::size_t j) {
  double s = 0.0;
  for (std::size_t i = 1; i <= j; ++i) s += m.at_segment_task(i, j);
  return s / static_cast<double>(j);
}

inline double forgetting_inner(const EvalMatrix& m, std::size_t j, std::vector<char>& warned) {
  double s = 0.0;
  for (std::size_t i = 1; i < j; ++i) {
    const double mx = normalizer(m, i, warned);
    if (mx == 0.0) continue;
    s += (m.at_segment_task(i, j - 1) - m.at_segment_task(i, j)) / mx;
  }
  return s / static_cast<double>(j - 1);
}

inline double transfer_inner(const EvalMatrix& m, std::size_t j, std::vector<char>& warned) {
  const std::size_t n = m.n_segments();
  double s = 0.0;
  for (std::size_t i = j + 1; i <= n; ++i) {
    const double mx = normalizer(m, i, warned);
    if (mx == 0.0) continue;
    s += (m.at_segment_task(i, j) - m.at_segment_task(i, j - 1)) / mx;
  }
  return s / static_cast<double>(n - j);
}

}  // namespace detail

inline double perf_P(const EvalMatrix& m) {
  m.validate();
  const std::size_t n = m.n_segments();
  double s = 0.0;
  for (std::size_t j = 1; j <= n; ++j) s += detail::performance_inner(m, j);
  return s / static_cast<double>(n);
}

inline double forgetting_F(const EvalMatrix& m) {
  m.validate();
  const std::size_t n = m.n_segments();
  if (n < 2) throw UndefinedMetricError("forgetting F needs at least two segments");
  std::vector<char> warned(m.n_tasks(), 0);
  double s = 0.0;
  for (std::size_t j = 2; j <= n; ++j) s += detail::forgetting_inner(m, j, warned);
  return s / static_cast<double>(n - 1);
}

inline double transfer_T(const EvalMatrix& m) {
  m.validate();
  const std::size_t n = m.n_segments();
  if (n < 2) throw UndefinedMetricError("transfer T needs at least two segments");
  std::vector<char> warned(m.n_tasks(), 0);
  double s = 0.0;
  for (std::size_t j = 1; j + 1 <= n; ++j) s += detail::transfer_inner(m, j, warned);
  return s / static_cast<double>(n - 1);
}

/// (P up, F down, T up). F and T are reported as 0 for single-segment matrices.
inline MetricsReport metrics_report(const EvalMatrix& m) {
  m.validate();
  MetricsReport rep;
  const std::size_t n = m.n_segments();
  rep.P = perf_P(m);
  if (n >= 2) {
    rep.F = forgetting_F(m);
    rep.T = transfer_T(m);
  }
  std::vector<char> warned(m.n_tasks(), 1);  // already warned above
  for (std::size_t j = 1; j <= n; ++j) {
    SegmentBreakdown b;
    b.segment = j;
    b.performance = detail::performance_inner(m, j);
    if (j >= 2) b.forgetting = detail::forgetting_inner(m, j, warned);
    if (j < n) b.transfer = detail::transfer_inner(m, j, warned);
    rep.per_segment.push_back(b);
  }
  return rep;
}

}  // namespace sdw
