#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "potmde/error.hpp"
#include "potmde/rng.hpp"
#include "potmde/asymptotics.hpp"
#include "potmde/threshold.hpp"

using namespace potmde;
using doctest::Approx;

namespace {

std::vector<EventCurve> gpd_curves(const GpdParams& t, std::size_t n, std::uint64_t seed) {
  const auto x = sample(t, n, seed);
  return {curve_from_aggregator(x, EventKind::Sum)};
}

}  // namespace

TEST_CASE("target estimate") {
  const auto c = gpd_curves(GpdParams(0.3, 1.0), 5000, 1);
  const ExceedanceSample s = exceedances(c, 1.0);
  const FitResult f = fit_mde(s);
  const TargetEstimate a = estimate_target(s, f, 1.0 + 1e-9, 365.0);
  CHECK(a.probability == Approx(s.rate).epsilon(1e-6));
  const TargetEstimate b = estimate_target(s, f, 6.0, 365.0);
  CHECK(b.expected_count == 365.0 * b.probability);
  CHECK_THROWS_AS(estimate_target(s, f, 1.0, 365.0), DomainError);
  CHECK_THROWS_AS(estimate_target(s, f, 0.5, 365.0), DomainError);
}

TEST_CASE("target estimate tracks the true tail") {
  const GpdParams t(0.3, 1.0);
  const double u = quantile(t, 0.9), q = quantile(t, 0.999);
  std::vector<double> rel;
  for (int r = 0; r < 200; ++r) {
    const auto c = gpd_curves(t, 5000, derive_seed(99, {static_cast<std::uint64_t>(r)}));
    const ExceedanceSample s = exceedances(c, u);
    const TargetEstimate e = estimate_target(s, fit_mde(s), q, 1.0);
    rel.push_back(std::abs(e.probability - 0.001) / 0.001);
  }
  std::nth_element(rel.begin(), rel.begin() + 100, rel.end());
  // median |error| of a normal is 0.674 sd; conditional tail at u is GPD(0.3, 1 + 0.3 u)
  const GpdParams tu(0.3, 1.0 + 0.3 * u);
  const double sd = std::sqrt(var_survival(tu, q - u) / 500.0) / survival(tu, q - u);
  CHECK(rel[100] < 1.3 * 0.674 * sd);
}

TEST_CASE("scan on exact GPD data is flat, monotone in k and deterministic") {
  const auto c = gpd_curves(GpdParams(0.3, 1.0), 20000, 5);
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back(0.2 * i);
  ScanOptions o;
  const ThresholdScan a = scan(c, 30.0, grid, o);
  double m = 0, m2 = 0;
  for (const auto& r : a.records) {
    REQUIRE_FALSE(r.skipped);
    m += r.target.expected_count;
    m2 += r.target.expected_count * r.target.expected_count;
  }
  m /= grid.size();
  const double sd = std::sqrt(m2 / grid.size() - m * m);
  CHECK(sd / m < 0.25);
  for (std::size_t i = 1; i < a.records.size(); ++i) CHECK(a.records[i].k <= a.records[i - 1].k);
  o.execution = Execution::Parallel;
  const ThresholdScan b = scan(c, 30.0, grid, o);
  std::ostringstream sa, sb;
  write_scan_table(sa, a);
  write_scan_table(sb, b);
  CHECK(sa.str() == sb.str());

  const std::vector<double> single{1.0};
  const ThresholdScan one = scan(c, 30.0, single, ScanOptions{});
  const ExceedanceSample s = exceedances(c, 1.0);
  CHECK(one.records[0].target.expected_count ==
        Approx(estimate_target(s, fit_mde(s), 30.0, one.n_per_run).expected_count).epsilon(1e-12));
}

TEST_CASE("sparse thresholds are skipped") {
  const auto c = gpd_curves(GpdParams(0.3, 1.0), 300, 6);
  const std::vector<double> grid{0.0, 50.0};
  const ThresholdScan s = scan(c, 100.0, grid);
  CHECK_FALSE(s.records[0].skipped);
  CHECK(s.records[1].skipped);
  CHECK_THROWS_AS(scan(c, 10.0, std::vector<double>{20.0}), DomainError);
}

TEST_CASE("region averages") {
  ThresholdScan s;
  for (int i = 0; i < 5; ++i) {
    ScanRecord r;
    r.u = i;
    r.target = {0.01 * (i + 1), 1.0 * (i + 1)};
    s.records.push_back(r);
  }
  s.records[2].skipped = true;
  const RegionAverage one = average_over_region(s, 1.0, 1.0);
  CHECK(one.expected_count == 2.0);
  const RegionAverage r = average_over_region(s, 0.5, 3.5);
  CHECK(r.contributing_us == std::vector<double>{1.0, 3.0});
  CHECK(r.expected_count == Approx(3.0));
  CHECK_THROWS_AS(average_over_region(s, 10.0, 11.0), DomainError);
  ThresholdScan eq;
  for (int i = 0; i < 2; ++i) {
    ScanRecord rec;
    rec.u = i;
    rec.target = {0.5, 7.0};
    eq.records.push_back(rec);
  }
  CHECK(average_over_region(eq, 0, 1).expected_count == 7.0);
  const auto adv = suggest_stable_region(eq, 0.1, 2);
  REQUIRE(adv.has_value());
  CHECK(adv->first == 0.0);
  CHECK(adv->second == 1.0);
}
