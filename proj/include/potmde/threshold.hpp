#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "potmde/asymptotics.hpp"
#include "potmde/events.hpp"
#include "potmde/execution.hpp"
#include "potmde/mde.hpp"

namespace potmde {

struct TargetEstimate {
  double probability = 0.0;     // rate * S(q - u)
  double expected_count = 0.0;  // n_per_run * probability
};

/// P(event at level q) ~ P(event at u) * S(q - u).
TargetEstimate estimate_target(const ExceedanceSample& sample, const FitResult& fit, double q, double n_per_run);

struct ScanOptions {
  FitMethod method = FitMethod::Mde2;
  FitOptions fit;
  std::size_t min_k = 20;
  bool with_ci = true;  // count-scale CI; two-parameter MDE only
  CiOptions ci;
  double n_per_run = 0.0;  // 0: mean effective run length
  Execution execution = Execution::Serial;
};

struct ScanRecord {
  double u = 0.0;
  long long k = 0;
  std::optional<FitResult> fit;
  TargetEstimate target;
  std::optional<CiResult> ci;
  bool skipped = false;
  std::string note;
};

struct ThresholdScan {
  double target_q = 0.0;
  double n_per_run = 0.0;
  std::vector<ScanRecord> records;  // ordered as u_grid
};

ThresholdScan scan(std::span<const EventCurve> curves, double q, std::span<const double> u_grid,
                   const ScanOptions& opts = {});

struct RegionAverage {
  double probability = 0.0;
  double expected_count = 0.0;
  std::vector<double> contributing_us;
};

/// Unweighted mean over non-skipped grid points in [u1, u2].
RegionAverage average_over_region(const ThresholdScan& scan, double u1, double u2);

/// Advisory only: longest run of consecutive fitted points whose expected
/// counts stay within rel_tol of their mean. Returns [u1, u2] or nothing.
std::optional<std::pair<double, double>> suggest_stable_region(const ThresholdScan& scan, double rel_tol = 0.1,
                                                               std::size_t min_points = 3);

/// Columns: u,k,gamma,mu,sigma,target_probability,expected_count,ci_lo,ci_hi,skipped_flag
void write_scan_table(std::ostream& out, const ThresholdScan& scan);

}  // namespace potmde
