#include "potmde/residual.hpp"

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "potmde/error.hpp"

namespace potmde {

namespace {

void require_mde(const FitResult& fit, const char* what) {
  if (fit.method == FitMethod::Mle) throw UnsupportedError(std::string(what) + " requires an MDE fit");
}

// x with S(x) == c for 0 < c < 1.
double level_crossing(const GpdParams3& m, double c) {
  return m.mu() + m.sigma() / m.gamma() * std::expm1(-m.gamma() * std::log(c));
}

}  // namespace

ResidualCurve::ResidualCurve(StepFunction step, GpdParams3 model) : step_(std::move(step)), model_(model) {}

double ResidualCurve::operator()(double x) const {
  if (!(x >= 0.0)) throw DomainError("residual curve is defined on [0, inf)");
  return std::abs(step_(x) - survival3(model_, x));
}

double ResidualCurve::integral_weighted(double p) const {
  // On a segment with constant level c: int |c - S| S^p, split where S crosses c.
  const auto seg = [&](double a, Limit b, double c) {
    const double ip = integral_survival3_power(model_, p, a, b);
    const double ip1 = integral_survival3_power(model_, p + 1.0, a, b);
    const double sa = survival3(model_, a);
    const double sb = b.is_infinite() ? 0.0 : survival3(model_, b.value());
    if (c <= sb) return ip1 - c * ip;  // S >= c throughout
    if (c >= sa) return c * ip - ip1;
    const double xc = std::clamp(level_crossing(model_, c), a, b.is_infinite() ? HUGE_VAL : b.value());
    const double lp = integral_survival3_power(model_, p, a, xc);
    const double lp1 = integral_survival3_power(model_, p + 1.0, a, xc);
    return (lp1 - c * lp) + (c * (ip - lp) - (ip1 - lp1));
  };
  const auto& br = step_.breaks();
  double total = 0.0;
  double a = 0.0;
  for (std::size_t i = 0; i < br.size(); ++i) {
    total += seg(a, br[i], step_.level_before(i));
    a = br[i];
  }
  total += integral_survival3_power(model_, p + 1.0, a, Limit::infinity());
  return total;
}

ResidualCurve residuals(const ExceedanceSample& sample, const FitResult& fit) {
  if (fit.k != sample.total_k)
    throw DataError("fit was not produced from this sample (k = " + std::to_string(fit.k) + ", sample has " +
                    std::to_string(sample.total_k) + ")");
  return ResidualCurve(sample.pooled_step, fit.params3());
}

namespace {

PhiFit finish_phi(double num, const FitResult& fit) {
  const double den = integral_survival3_power(fit.params3(), 1.0, 0.0, Limit::infinity());
  const double phi = num / den;
  if (!(phi > kPhiFloor)) return {kPhiFloor, true};
  return {phi, false};
}

}  // namespace

PhiFit fit_phi(const ResidualCurve& resid, const FitResult& fit) {
  require_mde(fit, "fit_phi");
  if (!(resid.model() == fit.params3())) throw DataError("residual curve was built from a different fit");
  return finish_phi(resid.integral_weighted(0.5), fit);
}

PhiFit fit_phi(const std::function<double(double)>& resid, const FitResult& fit) {
  require_mde(fit, "fit_phi");
  const GpdParams3 m = fit.params3();
  const auto f = [&](double x) { return resid(x) * std::sqrt(survival3(m, x)); };
  double num = 0.0;
  const double head = std::max(m.mu(), 0.0);
  if (head > 0.0) num += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, head, 15, 1e-12);
  boost::math::quadrature::exp_sinh<double> tail;
  num += tail.integrate([&](double t) { return f(head + t); }, 0.0, std::numeric_limits<double>::infinity(), 1e-12);
  return finish_phi(num, fit);
}

CiResult residual_ci(const FitResult& fit, double phi, double x, const CiOptions& opts) {
  require_mde(fit, "residual_ci");
  if (fit.k < static_cast<long long>(opts.min_k))
    throw DataError("confidence interval needs k >= " + std::to_string(opts.min_k) + ", got " + std::to_string(fit.k));
  if (!(x >= 0.0)) throw DomainError("residual_ci: x must be >= 0");
  const double s = fitted_survival(fit, x);
  CiResult r = interval_from_sd(s, phi * std::sqrt(s), fit.k, x, opts);
  r.scale_note += "; residual-based sd = phi * sqrt(S)";
  return r;
}

CiResult residual_ci(const ExceedanceSample& sample, const FitResult& fit, double x, const CiOptions& opts) {
  const PhiFit pf = fit_phi(residuals(sample, fit), fit);
  return residual_ci(fit, pf.phi, x, opts);
}

std::vector<ResidualRow> residual_table(const ResidualCurve& resid, double phi, std::size_t n_grid) {
  std::vector<double> xs;
  for (double b : resid.step().breaks()) {
    xs.push_back(std::nextafter(b, 0.0));
    xs.push_back(b);
  }
  const double hi = 1.25 * std::max(resid.upper_bound(), 1e-12);
  for (std::size_t i = 0; i <= n_grid; ++i) xs.push_back(hi * static_cast<double>(i) / static_cast<double>(n_grid));
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::vector<ResidualRow> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back({x, resid(x), phi * std::sqrt(survival3(resid.model(), x))});
  return out;
}

}  // namespace potmde
