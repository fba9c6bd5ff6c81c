#include "potmde/events.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "potmde/error.hpp"

namespace potmde {

PanelSeries::PanelSeries(std::vector<Run> runs) : runs_(std::move(runs)), d_(0) {
  if (runs_.empty()) throw DataError("panel has no runs");
  d_ = runs_.front().cols;
  if (d_ == 0) throw DataError("panel has no locations");
  for (const Run& r : runs_) {
    if (r.cols != d_) throw DataError("run '" + r.id + "' has a different number of locations");
    if (r.rows == 0) throw DataError("run '" + r.id + "' has no time points");
    if (r.values.size() != r.rows * r.cols) throw DataError("run '" + r.id + "' has inconsistent storage");
    for (double v : r.values)
      if (!std::isfinite(v) || v < 0.0) throw DataError("run '" + r.id + "' contains a negative or non-finite value");
  }
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Sum: return "sum";
    case EventKind::OrderStat: return "order_stat";
    case EventKind::RunPattern: return "run_pattern";
  }
  return "?";
}

EventKind event_kind_from_string(const std::string& name) {
  std::string s;
  for (char c : name) s.push_back(c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (s == "sum") return EventKind::Sum;
  if (s == "order_stat" || s == "orderstat") return EventKind::OrderStat;
  if (s == "run_pattern" || s == "runpattern") return EventKind::RunPattern;
  throw DataError("unknown event kind '" + name + "'");
}

void EventSpec::validate(std::size_t d) const {
  if (subset.empty()) throw DataError("event subset is empty");
  std::set<std::size_t> seen;
  for (std::size_t i : subset) {
    if (i < 1 || i > d) throw DataError("event subset index " + std::to_string(i) + " outside [1, " + std::to_string(d) + "]");
    if (!seen.insert(i).second) throw DataError("event subset index " + std::to_string(i) + " repeated");
  }
  if (kind != EventKind::Sum && (order_index < 1 || order_index > subset.size()))
    throw DataError("order_index must lie in [1, |subset|]");
}

long long CountsFunction::operator()(double q) const {
  const auto it = std::upper_bound(breaks.begin(), breaks.end(), q);
  if (it == breaks.begin()) return 0;
  return counts[static_cast<std::size_t>(it - breaks.begin()) - 1];
}

std::vector<std::vector<double>> project(const PanelSeries& panel, const EventSpec& spec) {
  spec.validate(panel.locations());
  std::vector<std::vector<double>> out;
  out.reserve(panel.runs().size());
  std::vector<double> buf(spec.subset.size());
  for (const Run& run : panel.runs()) {
    std::vector<double> g(run.rows);
    for (std::size_t t = 0; t < run.rows; ++t) {
      if (spec.kind == EventKind::Sum) {
        double s = 0.0;
        for (std::size_t i : spec.subset) s += run.at(t, i - 1);
        g[t] = s;
      } else {
        for (std::size_t j = 0; j < spec.subset.size(); ++j) buf[j] = run.at(t, spec.subset[j] - 1);
        const auto nth = buf.begin() + static_cast<std::ptrdiff_t>(spec.order_index - 1);
        std::nth_element(buf.begin(), nth, buf.end());
        g[t] = *nth;
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

EventCurve curve_from_aggregator(std::span<const double> g, EventKind kind) {
  EventCurve curve;
  curve.kind = kind;
  if (kind != EventKind::RunPattern) {
    curve.intervals.reserve(g.size());
    for (double v : g) curve.intervals.push_back({0.0, v});
    curve.n_effective = g.size();
    return curve;
  }
  if (g.size() < 3) throw DataError("run-pattern events need at least 3 time points");
  curve.intervals.reserve(g.size() - 2);
  for (std::size_t t = 1; t + 1 < g.size(); ++t) {
    const double hi = std::min(g[t], g[t + 1]);
    const double lo = g[t - 1];
    curve.intervals.push_back(lo < hi ? Interval{lo, hi} : Interval{hi, hi});
  }
  curve.n_effective = g.size() - 2;
  return curve;
}

std::vector<EventCurve> event_curve(const PanelSeries& panel, const EventSpec& spec) {
  const auto series = project(panel, spec);
  std::vector<EventCurve> curves;
  curves.reserve(series.size());
  for (const auto& g : series) curves.push_back(curve_from_aggregator(g, spec.kind));
  return curves;
}

long long count_at(const EventCurve& curve, double q) {
  long long n = 0;
  for (const Interval& iv : curve.intervals) n += iv.contains(q) ? 1 : 0;
  return n;
}

CountsFunction counts_function(std::span<const EventCurve> curves) {
  std::vector<std::pair<double, int>> events;
  for (const EventCurve& c : curves)
    for (const Interval& iv : c.intervals)
      if (iv.lo < iv.hi) {
        events.emplace_back(iv.lo, +1);
        events.emplace_back(iv.hi, -1);
      }
  std::sort(events.begin(), events.end());
  CountsFunction f;
  long long running = 0;
  std::size_t i = 0;
  while (i < events.size()) {
    const double q = events[i].first;
    while (i < events.size() && events[i].first == q) running += events[i++].second;
    const long long before = f.counts.empty() ? 0 : f.counts.back();
    if (running != before) {
      f.breaks.push_back(q);
      f.counts.push_back(running);
    }
  }
  return f;
}

CountsFunction counts_function(const EventCurve& curve) { return counts_function(std::span(&curve, 1)); }

ExceedanceSample exceedances(std::span<const EventCurve> curves, double u) {
  if (curves.empty()) throw DataError("exceedances: no runs");
  if (!(u >= 0.0) || !std::isfinite(u)) throw DomainError("exceedances: threshold u must be finite and >= 0");
  const bool monotone = curves.front().monotone();
  for (const EventCurve& c : curves)
    if (c.monotone() != monotone) throw DataError("exceedances: runs mix event kinds");

  std::vector<long long> per_run;
  std::size_t n_total = 0;
  for (const EventCurve& c : curves) {
    per_run.push_back(count_at(c, u));
    n_total += c.n_effective;
  }

  if (monotone) {
    std::vector<double> excesses;
    for (const EventCurve& c : curves)
      for (const Interval& iv : c.intervals)
        if (iv.hi > u) excesses.push_back(iv.hi - u);
    if (excesses.empty()) throw DataError("no exceedances above u = " + std::to_string(u));
    std::sort(excesses.begin(), excesses.end());
    const long long k = static_cast<long long>(excesses.size());
    StepFunction step = StepFunction::from_excesses(excesses);
    return ExceedanceSample{u, std::move(per_run), std::move(excesses), std::move(step), k, n_total,
                            static_cast<double>(k) / static_cast<double>(n_total), true};
  }

  // Run-pattern counts need not be monotone in q. The pooled survival uses the
  // upper envelope sup_{w >= q} N(w), which is monotone and equals N wherever N
  // is already nonincreasing above u.
  const CountsFunction n = counts_function(curves);
  std::vector<long long> envelope(n.counts.size());
  long long best = 0;
  for (std::size_t i = n.counts.size(); i-- > 0;) {
    best = std::max(best, n.counts[i]);
    envelope[i] = best;
  }
  const auto pos = std::upper_bound(n.breaks.begin(), n.breaks.end(), u);
  const std::size_t first_after = static_cast<std::size_t>(pos - n.breaks.begin());
  const long long k = first_after == 0 ? (envelope.empty() ? 0 : envelope.front()) : envelope[first_after - 1];
  if (k == 0) throw DataError("no exceedances above u = " + std::to_string(u));

  std::vector<double> breaks;
  std::vector<double> levels;
  long long current = k;
  for (std::size_t i = first_after; i < n.breaks.size(); ++i) {
    if (envelope[i] == current) continue;
    current = envelope[i];
    breaks.push_back(n.breaks[i] - u);
    levels.push_back(static_cast<double>(current) / static_cast<double>(k));
  }
  StepFunction step(1.0, std::move(breaks), std::move(levels));
  return ExceedanceSample{u, std::move(per_run), {}, std::move(step), k, n_total,
                          static_cast<double>(k) / static_cast<double>(n_total), false};
}

double empirical_survival(const ExceedanceSample& sample, double x) {
  if (!(x >= 0.0)) throw DomainError("empirical_survival: x must be >= 0");
  return sample.pooled_step(x);
}

}  // namespace potmde
