#include "potmde/gpd.hpp"

#include <cmath>
#include <string>

#include "potmde/error.hpp"
#include "potmde/rng.hpp"

namespace potmde {

namespace {

void check_nonneg(double x, const char* what) {
  if (!(x >= 0.0)) throw DomainError(std::string(what) + ": x must be >= 0, got " + std::to_string(x));
}

// Integral of S^p over [0, x]: sigma (1 - (1+z)^((gamma-p)/gamma)) / (p - gamma),
// written with expm1 so that p -> gamma degrades smoothly to sigma log(1+z) / gamma.
double primitive_power(double gamma, double sigma, double p, double x) {
  if (x == 0.0) return 0.0;
  const double t = std::log1p(gamma * x / sigma);
  const double d = p - gamma;
  if (std::abs(d) < 1e-12) return sigma * t / gamma;
  return -sigma * std::expm1(-d * t / gamma) / d;
}

}  // namespace

GpdParams::GpdParams(double gamma, double sigma) : gamma_(gamma), sigma_(sigma) {
  if (!(gamma > 0.0 && gamma < 2.0))
    throw DomainError("GPD shape gamma must lie in (0, 2), got " + std::to_string(gamma));
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw DomainError("GPD scale sigma must be positive and finite, got " + std::to_string(sigma));
}

GpdParams3::GpdParams3(double gamma, double mu, double sigma) : gamma_(gamma), mu_(mu), sigma_(sigma) {
  GpdParams check(gamma, sigma);
  (void)check;
  if (!std::isfinite(mu)) throw DomainError("GPD location mu must be finite");
}

double survival(const GpdParams& theta, double x) {
  check_nonneg(x, "survival");
  return std::pow(1.0 + theta.gamma() * x / theta.sigma(), -1.0 / theta.gamma());
}

double cdf(const GpdParams& theta, double x) {
  check_nonneg(x, "cdf");
  // -expm1 keeps precision for small x where the survival is close to 1.
  return -std::expm1(-std::log1p(theta.gamma() * x / theta.sigma()) / theta.gamma());
}

double density(const GpdParams& theta, double x) {
  check_nonneg(x, "density");
  const double g = theta.gamma();
  return std::pow(1.0 + g * x / theta.sigma(), -1.0 / g - 1.0) / theta.sigma();
}

double quantile(const GpdParams& theta, double p) {
  if (!(p >= 0.0 && p < 1.0)) throw DomainError("quantile: p must lie in [0, 1), got " + std::to_string(p));
  const double g = theta.gamma();
  return theta.sigma() / g * std::expm1(-g * std::log1p(-p));
}

std::vector<double> sample(const GpdParams& theta, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("sample: n must be >= 1");
  Rng rng(seed);
  std::vector<double> out(n);
  const double g = theta.gamma();
  const double s = theta.sigma();
  for (double& x : out) {
    const double u = rng.uniform_open0();  // survival level in (0, 1]
    x = s / g * std::expm1(-g * std::log(u));
  }
  return out;
}

double survival3(const GpdParams3& vartheta, double x) {
  if (!(x >= vartheta.mu())) return 1.0;
  const double z = vartheta.gamma() * (x - vartheta.mu()) / vartheta.sigma();
  return std::pow(1.0 + z, -1.0 / vartheta.gamma());
}

double integral_survival_power(const GpdParams& theta, double power, double a, Limit b) {
  check_nonneg(a, "integral_survival_power");
  if (!(power >= 0.0)) throw DomainError("integral_survival_power: power must be nonnegative");
  const double g = theta.gamma();
  const double s = theta.sigma();
  if (b.is_infinite()) {
    if (!(power > g))
      throw DivergenceError("integral of S^" + std::to_string(power) + " over [a, inf) diverges for gamma = " +
                            std::to_string(g));
    // sigma/(p-gamma) * (1 + gamma a/sigma)^((gamma-p)/gamma)
    const double t = std::log1p(g * a / s);
    return s / (power - g) * std::exp(-(power - g) * t / g);
  }
  if (!(b.value() >= a)) throw DomainError("integral_survival_power: requires a <= b");
  if (b.value() == a) return 0.0;
  if (power == 0.0) return b.value() - a;
  return primitive_power(g, s, power, b.value()) - primitive_power(g, s, power, a);
}

double integral_survival3_power(const GpdParams3& vartheta, double power, double a, Limit b) {
  check_nonneg(a, "integral_survival3_power");
  if (!b.is_infinite() && !(b.value() >= a)) throw DomainError("integral_survival3_power: requires a <= b");
  const double mu = vartheta.mu();
  double flat = 0.0;  // region below mu where survival3 == 1
  if (a < mu) {
    const double hi = b.is_infinite() ? mu : std::min(b.value(), mu);
    flat = hi - a;
  }
  const double lo = std::max(a, mu) - mu;
  if (!b.is_infinite() && b.value() <= mu) return flat;
  const Limit hi = b.is_infinite() ? Limit::infinity() : Limit(b.value() - mu);
  return flat + integral_survival_power(vartheta.shape_scale(), power, lo, hi);
}

}  // namespace potmde
