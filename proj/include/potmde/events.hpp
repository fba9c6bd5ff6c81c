#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "potmde/step_function.hpp"

namespace potmde {

/// One simulation run: rows are time points, columns are locations.
struct Run {
  std::string id;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major, rows * cols

  double at(std::size_t t, std::size_t loc) const { return values[t * cols + loc]; }
};

/// Multi-run panel; every run has the same number of locations d.
class PanelSeries {
 public:
  explicit PanelSeries(std::vector<Run> runs);

  const std::vector<Run>& runs() const { return runs_; }
  std::size_t locations() const { return d_; }

 private:
  std::vector<Run> runs_;
  std::size_t d_;
};

enum class EventKind { Sum, OrderStat, RunPattern };

const char* to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& name);

/// Declarative event. Subset indices are 1-based location numbers.
///   Sum        : sum over subset > q
///   OrderStat  : order_index-th smallest over subset > q
///   RunPattern : g(t-1) <= q and min(g(t), g(t+1)) > q, with g the OrderStat aggregator
struct EventSpec {
  EventKind kind = EventKind::Sum;
  std::vector<std::size_t> subset;
  std::size_t order_index = 1;

  void validate(std::size_t d) const;
};

/// Half-open threshold interval [lo, hi) on which the event holds at one time point.
struct Interval {
  double lo;
  double hi;
  bool contains(double q) const { return lo <= q && q < hi; }
};

struct EventCurve {
  EventKind kind = EventKind::Sum;
  std::vector<Interval> intervals;
  std::size_t n_effective = 0;

  bool monotone() const { return kind != EventKind::RunPattern; }
};

/// Piecewise-constant N(q): counts[i] holds on [breaks[i], breaks[i+1]); N = 0 below breaks[0].
struct CountsFunction {
  std::vector<double> breaks;
  std::vector<long long> counts;

  long long operator()(double q) const;
};

std::vector<std::vector<double>> project(const PanelSeries& panel, const EventSpec& spec);

EventCurve curve_from_aggregator(std::span<const double> g, EventKind kind);
std::vector<EventCurve> event_curve(const PanelSeries& panel, const EventSpec& spec);

long long count_at(const EventCurve& curve, double q);
CountsFunction counts_function(const EventCurve& curve);
CountsFunction counts_function(std::span<const EventCurve> curves);

struct ExceedanceSample {
  double threshold_u = 0.0;
  std::vector<long long> per_run_counts;
  std::vector<double> pooled_excesses;  // sorted; empty for run-pattern events
  StepFunction pooled_step;
  long long total_k = 0;
  std::size_t n_total = 0;  // sum of n_effective over runs
  double rate = 0.0;        // total_k / n_total
  bool monotone = true;
};

/// Pooled exceedances above u over all runs.
ExceedanceSample exceedances(std::span<const EventCurve> curves, double u);

double empirical_survival(const ExceedanceSample& sample, double x);

}  // namespace potmde
