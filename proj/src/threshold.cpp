#include "potmde/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>

#include "potmde/error.hpp"
#include "potmde/format.hpp"

namespace potmde {

TargetEstimate estimate_target(const ExceedanceSample& sample, const FitResult& fit, double q, double n_per_run) {
  if (!(q > sample.threshold_u))
    throw DomainError("target level q must exceed the threshold u (q = " + std::to_string(q) +
                      ", u = " + std::to_string(sample.threshold_u) + ")");
  if (!(n_per_run > 0.0)) throw DomainError("n_per_run must be positive");
  TargetEstimate t;
  t.probability = sample.rate * fitted_survival(fit, q - sample.threshold_u);
  t.expected_count = n_per_run * t.probability;
  return t;
}

namespace {

ScanRecord scan_one(std::span<const EventCurve> curves, double q, double u, double n_per_run,
                    const ScanOptions& opts) {
  ScanRecord rec;
  rec.u = u;
  try {
    ExceedanceSample s = exceedances(curves, u);
    rec.k = s.total_k;
    if (s.total_k < static_cast<long long>(opts.min_k)) {
      rec.skipped = true;
      rec.note = "k below min_k";
      return rec;
    }
    FitOptions fo = opts.fit;
    fo.parallel_starts = false;
    rec.fit = fit(s, opts.method, fo);
    rec.target = estimate_target(s, *rec.fit, q, n_per_run);
    if (opts.with_ci && opts.method == FitMethod::Mde2 && s.total_k >= static_cast<long long>(opts.ci.min_k)) {
      const double x = q - u;
      CiResult c = confidence_interval(*rec.fit, x, opts.ci);
      c.center *= n_per_run * s.rate;
      c.half_width *= n_per_run * s.rate;
      c.lo *= n_per_run * s.rate;
      c.hi *= n_per_run * s.rate;
      c.scale_note += "; count scale, rate held fixed";
      rec.ci = c;
    }
  } catch (const std::exception& e) {
    rec.skipped = true;
    rec.fit.reset();
    rec.ci.reset();
    rec.target = {};
    rec.note = e.what();
  }
  return rec;
}

}  // namespace

ThresholdScan scan(std::span<const EventCurve> curves, double q, std::span<const double> u_grid,
                   const ScanOptions& opts) {
  if (curves.empty()) throw DataError("scan needs at least one event curve");
  if (u_grid.empty()) throw DomainError("empty threshold grid");
  if (!std::is_sorted(u_grid.begin(), u_grid.end())) throw DomainError("threshold grid must be sorted");
  if (!(q > u_grid.back())) throw DomainError("target level q must exceed every threshold in the grid");
  ThresholdScan out;
  out.target_q = q;
  if (opts.n_per_run > 0.0) {
    out.n_per_run = opts.n_per_run;
  } else {
    double n = 0.0;
    for (const auto& c : curves) n += static_cast<double>(c.n_effective);
    out.n_per_run = n / static_cast<double>(curves.size());
  }
  out.records.resize(u_grid.size());
  const long m = static_cast<long>(u_grid.size());
  const bool par = opts.execution == Execution::Parallel;
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic) if (par)
  for (long i = 0; i < m; ++i) {
    try {
      out.records[i] = scan_one(curves, q, u_grid[i], out.n_per_run, opts);
    } catch (...) {
#pragma omp critical(potmde_scan_err)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

RegionAverage average_over_region(const ThresholdScan& scan, double u1, double u2) {
  if (u1 > u2) std::swap(u1, u2);
  RegionAverage r;
  for (const auto& rec : scan.records) {
    if (rec.skipped || rec.u < u1 || rec.u > u2) continue;
    r.probability += rec.target.probability;
    r.expected_count += rec.target.expected_count;
    r.contributing_us.push_back(rec.u);
  }
  if (r.contributing_us.empty())
    throw DomainError("no fitted threshold in [" + std::to_string(u1) + ", " + std::to_string(u2) + "]");
  const double n = static_cast<double>(r.contributing_us.size());
  r.probability /= n;
  r.expected_count /= n;
  return r;
}

std::optional<std::pair<double, double>> suggest_stable_region(const ThresholdScan& scan, double rel_tol,
                                                               std::size_t min_points) {
  const auto& recs = scan.records;
  std::size_t best_len = 0, best_i = 0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    double lo = HUGE_VAL, hi = -HUGE_VAL, sum = 0.0;
    for (std::size_t j = i; j < recs.size() && !recs[j].skipped; ++j) {
      const double v = recs[j].target.expected_count;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
      const double mean = sum / static_cast<double>(j - i + 1);
      if (!(mean > 0.0) || (hi - lo) > rel_tol * mean) break;
      if (j - i + 1 > best_len) {
        best_len = j - i + 1;
        best_i = i;
      }
    }
  }
  if (best_len < std::max<std::size_t>(min_points, 1)) return std::nullopt;
  return std::make_pair(recs[best_i].u, recs[best_i + best_len - 1].u);
}

void write_scan_table(std::ostream& out, const ThresholdScan& scan) {
  out << "u,k,gamma,mu,sigma,target_probability,expected_count,ci_lo,ci_hi,skipped_flag\n";
  for (const auto& r : scan.records) {
    out << fmt_num(r.u) << ',' << r.k << ',';
    if (r.fit) {
      out << fmt_num(r.fit->gamma) << ',' << fmt_num(r.fit->mu) << ',' << fmt_num(r.fit->sigma) << ','
          << fmt_num(r.target.probability) << ',' << fmt_num(r.target.expected_count) << ',';
    } else {
      out << "NA,NA,NA,NA,NA,";
    }
    if (r.ci)
      out << fmt_num(r.ci->lo) << ',' << fmt_num(r.ci->hi) << ',';
    else
      out << "NA,NA,";
    out << (r.skipped ? 1 : 0) << '\n';
  }
}

}  // namespace potmde
