#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace potmde {

/// Shape/scale parameters of the two-parameter generalized Pareto distribution,
/// S(x) = (1 + gamma x / sigma)^(-1/gamma) for x >= 0.
///
/// Construction enforces 0 < gamma < 2 (square-integrable survival) and
/// sigma > 0. Operations with stricter requirements (asymptotic inference
/// needs gamma < 1) check at their own boundary.
class GpdParams {
 public:
  GpdParams(double gamma, double sigma);

  double gamma() const { return gamma_; }
  double sigma() const { return sigma_; }

  friend bool operator==(const GpdParams&, const GpdParams&) = default;

 private:
  double gamma_;
  double sigma_;
};

/// Three-parameter GPD with location mu; survival is clamped to 1 below mu.
class GpdParams3 {
 public:
  GpdParams3(double gamma, double mu, double sigma);
  explicit GpdParams3(const GpdParams& theta) : GpdParams3(theta.gamma(), 0.0, theta.sigma()) {}

  double gamma() const { return gamma_; }
  double mu() const { return mu_; }
  double sigma() const { return sigma_; }
  GpdParams shape_scale() const { return GpdParams(gamma_, sigma_); }

  friend bool operator==(const GpdParams3&, const GpdParams3&) = default;

 private:
  double gamma_;
  double mu_;
  double sigma_;
};

/// Integration limit that may be +infinity. Infinity is a flag, never a large float.
class Limit {
 public:
  Limit(double value) : value_(value), infinite_(false) {}  // NOLINT(implicit)
  static Limit infinity() { return Limit(); }

  bool is_infinite() const { return infinite_; }
  double value() const { return value_; }

 private:
  Limit() : value_(std::numeric_limits<double>::infinity()), infinite_(true) {}
  double value_;
  bool infinite_;
};

double survival(const GpdParams& theta, double x);
double cdf(const GpdParams& theta, double x);
double density(const GpdParams& theta, double x);
double quantile(const GpdParams& theta, double p);

/// Inverse-transform draws; identical output for identical (theta, n, seed).
std::vector<double> sample(const GpdParams& theta, std::size_t n, std::uint64_t seed);

double survival3(const GpdParams3& vartheta, double x);

/// Integral of S^power over [a, b]. Closed form; b may be infinite when power > gamma.
double integral_survival_power(const GpdParams& theta, double power, double a, Limit b);

inline double integral_survival(const GpdParams& theta, double a, Limit b) {
  return integral_survival_power(theta, 1.0, a, b);
}
inline double integral_survival_squared(const GpdParams& theta, double a, Limit b) {
  return integral_survival_power(theta, 2.0, a, b);
}

/// Integral of survival3^power over [a, b] with a >= 0 (the part below mu contributes b-a).
double integral_survival3_power(const GpdParams3& vartheta, double power, double a, Limit b);

}  // namespace potmde
