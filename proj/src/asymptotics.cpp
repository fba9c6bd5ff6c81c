#include "potmde/asymptotics.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "potmde/error.hpp"

namespace potmde {

namespace {

void require_open_unit(double gamma, const char* what) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw DomainError(std::string(what) + ": gamma must lie in (0, 1), got " + std::to_string(gamma));
}

// Polynomials shared by the Sigma display, the variance display and the limits.
double poly_sigma11(double g) { return g * (g * (2 * g * (4 * g * g - 58 * g + 243) - 683) + 452) - 639; }
double poly_sigma12(double g) { return g * (g * (2 * g * (4 * g * g - 50 * g + 207) - 791) + 778) - 387; }
double poly_sigma22(double g) { return g * (g * (8 * g * g * g - 84 * g * g + 374 * g - 843) + 944) - 423; }

}  // namespace

CovMatrix2 CovMatrix2::inverse() const {
  const double d = det();
  if (!std::isfinite(d) || std::abs(d) < 1e-300) throw NumericError("singular 2x2 matrix");
  return {a22 / d, -a12 / d, a11 / d};
}

std::array<double, 2> CovMatrix2::eigenvalues() const {
  const double m = 0.5 * (a11 + a22);
  const double r = std::hypot(0.5 * (a11 - a22), a12);
  return {m - r, m + r};
}

CovMatrix2 matrix_U(const GpdParams& theta) {
  const double g = theta.gamma();
  const double s = theta.sigma();
  require_open_unit(g, "matrix_U");
  const double gm2 = g - 2.0;
  return {(g - 6.0) * s / (2.0 * gm2 * gm2 * gm2 * (g + 2.0)), (6.0 - g) / (4.0 * gm2 * gm2 * (g + 2.0)),
          1.0 / (4.0 * s - g * g * s)};
}

CovMatrix2 matrix_V(const GpdParams& theta) {
  const double g = theta.gamma();
  const double s = theta.sigma();
  require_open_unit(g, "matrix_V");
  const double gm2 = g - 2.0, gm3 = g - 3.0, g23 = 2.0 * g - 3.0;
  const double q = 2.0 * g * g - 9.0 * g + 9.0;
  const double v11 = (8 * std::pow(g, 5) - 148 * std::pow(g, 4) + 918 * g * g * g - 2587 * g * g + 3416 * g - 1719) *
                     s * s / (12.0 * gm3 * gm3 * std::pow(gm2, 4) * g23 * g23 * g23);
  const double v12 = (g * (g * (-4.0 * (g - 15.0) * g - 285.0) + 548.0) - 369.0) * s / (12.0 * gm2 * gm2 * gm2 * q * q);
  const double v22 = (g * (2.0 * g - 17.0) + 29.0) / (12.0 * gm3 * gm2 * gm2 * g23);
  return {v11, v12, v22};
}

CovMatrix2 sigma_matrix(const GpdParams& theta) {
  const double g = theta.gamma();
  const double s = theta.sigma();
  require_open_unit(g, "sigma_matrix");
  const double gm2 = g - 2.0, gm3 = g - 3.0, gm6 = g - 6.0, g23 = 2.0 * g - 3.0;
  const double den = 3.0 * gm3 * gm3 * g23 * g23 * g23;
  return {4.0 * std::pow(gm2, 4) * poly_sigma11(g) / (gm6 * gm6 * den),
          4.0 * gm2 * gm2 * poly_sigma12(g) * s / (gm6 * den), 4.0 * poly_sigma22(g) * s * s / den};
}

CovMatrix2 sigma_matrix_sandwich(const GpdParams& theta) {
  const CovMatrix2 u = matrix_U(theta);
  if (std::abs(u.det()) < 1e-14) throw NumericError("matrix U is numerically singular");
  const CovMatrix2 ui = u.inverse();
  const CovMatrix2 v = matrix_V(theta);
  // U symmetric, so U^-T = U^-1: Sigma = Ui V Ui
  const double m11 = ui.a11 * v.a11 + ui.a12 * v.a12;
  const double m12 = ui.a11 * v.a12 + ui.a12 * v.a22;
  const double m21 = ui.a12 * v.a11 + ui.a22 * v.a12;
  const double m22 = ui.a12 * v.a12 + ui.a22 * v.a22;
  return {m11 * ui.a11 + m12 * ui.a12, m11 * ui.a12 + m12 * ui.a22, m21 * ui.a12 + m22 * ui.a22};
}

std::array<double, 2> gradient_survival(const GpdParams& theta, double x) {
  require_open_unit(theta.gamma(), "gradient_survival");
  if (!(x >= 0.0)) throw DomainError("gradient_survival: x must be >= 0");
  if (x == 0.0) return {0.0, 0.0};
  const double g = theta.gamma();
  const double s = theta.sigma();
  const double w = s + g * x;
  const double l = std::log1p(g * x / s);
  const double surv = std::exp(-l / g);
  return {surv * (w * l - g * x) / (g * g * w), surv * x / (s * w)};
}

double var_survival_quadratic(const GpdParams& theta, double x) {
  const auto d = gradient_survival(theta, x);
  return sigma_matrix(theta).quad(d, d);
}

double var_survival(const GpdParams& theta, double x) {
  const double g = theta.gamma();
  const double s = theta.sigma();
  require_open_unit(g, "var_survival");
  if (!(x >= 0.0)) throw DomainError("var_survival: x must be >= 0");
  if (x == 0.0) return 0.0;
  // The prefactor 3(3-2g)^3 (g-6)^2 (g-3)^2 g^4 (s+g x)^2 vanishes at g in {0, 3/2, 3, 6}.
  constexpr double kGuard = 1e-8;
  if (g < kGuard || std::abs(g - 1.5) < kGuard) return var_survival_quadratic(theta, x);
  const double w = s + g * x;
  const double l = std::log1p(g * x / s);
  const double wl = w * l;
  const double gm2 = g - 2.0, c32 = 3.0 - 2.0 * g;
  const double pref = 3.0 * c32 * c32 * c32 * (g - 6.0) * (g - 6.0) * (g - 3.0) * (g - 3.0) * std::pow(g, 4) * w * w;
  const double surv2 = std::exp(-2.0 * l / g);
  const double pa = g * (g * (30.0 * g * g - 266.0 * g + 857.0) - 1208.0) + 639.0;
  const double pc = 2.0 * g * (g * (8.0 * g * g - 62.0 * g + 223.0) - 415.0) + 639.0;
  const double bracket = 4.0 * g * g * (g + 2.0) * (g + 2.0) * pa * x * x +
                         gm2 * gm2 * wl * (-poly_sigma11(g) * gm2 * gm2 * wl - 4.0 * g * (g + 2.0) * pc * x);
  const double v = 4.0 * surv2 * bracket / pref;
  if (!std::isfinite(v)) return var_survival_quadratic(theta, x);
  return v;
}

double cov_kernel(const GpdParams& theta, double x, double x2) {
  return sigma_matrix(theta).quad(gradient_survival(theta, x), gradient_survival(theta, x2));
}

CovMatrix2 sigma_matrix_mle(double gamma, double sigma) {
  return {(gamma + 1.0) * (gamma + 1.0), -(gamma + 1.0) * sigma, 2.0 * (gamma + 1.0) * sigma * sigma};
}

CovMatrix2 sigma_matrix_mle(const GpdParams& theta) {
  require_open_unit(theta.gamma(), "sigma_matrix_mle");
  return sigma_matrix_mle(theta.gamma(), theta.sigma());
}

double var_survival_mle_quadratic(const GpdParams& theta, double x) {
  const auto d = gradient_survival(theta, x);
  return sigma_matrix_mle(theta).quad(d, d);
}

double var_survival_mle(const GpdParams& theta, double x) {
  const double g = theta.gamma();
  const double s = theta.sigma();
  require_open_unit(g, "var_survival_mle");
  if (!(x >= 0.0)) throw DomainError("var_survival_mle: x must be >= 0");
  if (x == 0.0) return 0.0;
  const double w = s + g * x;
  const double l = std::log1p(g * x / s);
  const double wl = w * l;
  const double rhs = (g + 1.0) * std::exp(-2.0 * l / g) *
                     ((g + 1.0) * (2.0 * g + 1.0) * g * g * x * x + wl * ((g + 1.0) * wl - 2.0 * g * (2.0 * g + 1.0) * x));
  return rhs / (std::pow(g, 4) * w * w);
}

double efficiency_mde_over_mle(const GpdParams& theta, double x) {
  if (!(x > 0.0)) throw DomainError("efficiency ratio is undefined at x = 0; use ratio_limits");
  require_open_unit(theta.gamma(), "efficiency_mde_over_mle");
  // S(x)^2 cancels; work with the gradient direction without it so large x cannot underflow.
  const double g = theta.gamma(), s = theta.sigma();
  const double w = s + g * x;
  const double l = std::log1p(g * x / s);
  const std::array<double, 2> u{(w * l - g * x) / (g * g * w), x / (s * w)};
  return sigma_matrix(theta).quad(u, u) / sigma_matrix_mle(theta).quad(u, u);
}

RatioLimits ratio_limits(double g) {
  const double at0 = 2.0 * (8 * std::pow(g, 5) - 84 * std::pow(g, 4) + 374 * g * g * g - 843 * g * g + 944 * g - 423) /
                     (3.0 * (g - 3.0) * (g - 3.0) * (g + 1.0) * std::pow(2.0 * g - 3.0, 3));
  const double atinf = -4.0 * std::pow(g - 2.0, 4) * poly_sigma11(g) /
                       (3.0 * std::pow(3.0 - 2.0 * g, 3) * (g - 6.0) * (g - 6.0) * (g - 3.0) * (g - 3.0) * (g + 1.0) *
                        (g + 1.0));
  return {at0, atinf};
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

CiResult interval_from_sd(double center, double sd, long long k, double x, const CiOptions& opts) {
  if (!(opts.level > 0.5 && opts.level < 1.0)) throw DomainError("confidence level must lie in (0.5, 1)");
  if (k <= 0) throw DomainError("confidence interval needs k >= 1");
  const double z = normal_quantile(0.5 * (1.0 + opts.level));
  const double rk = std::sqrt(static_cast<double>(k));
  CiResult r;
  r.center = center;
  r.level = opts.level;
  r.x = x;
  r.k = k;
  if (opts.convention == CiConvention::Corrected) {
    r.half_width = z * sd / rk;
    r.scale_note = "half_width = z * sd / sqrt(k)";
  } else {
    r.half_width = rk * z * sd;
    r.scale_note = "half_width = sqrt(k) * z * sd (strict printed form)";
  }
  r.lo = std::max(0.0, center - r.half_width);
  r.hi = std::min(1.0, center + r.half_width);
  return r;
}

CiResult confidence_interval(const FitResult& fit, double x, const CiOptions& opts) {
  if (fit.method != FitMethod::Mde2)
    throw UnsupportedError("confidence intervals are only available for two-parameter MDE fits");
  if (fit.k < static_cast<long long>(opts.min_k))
    throw DataError("confidence interval needs k >= " + std::to_string(opts.min_k) + ", got " + std::to_string(fit.k));
  const GpdParams theta = fit.theta();
  return interval_from_sd(survival(theta, x), std::sqrt(var_survival(theta, x)), fit.k, x, opts);
}

CiResult target_ci(const FitResult& fit, double x, double n_total, double rate, const CiOptions& opts,
                   const TargetCiOptions& topts) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw DomainError("target_ci: rate must lie in [0, 1]");
  if (!(n_total > 0.0)) throw DomainError("target_ci: n_total must be positive");
  CiResult r = confidence_interval(fit, x, opts);
  const double scale = n_total * rate;
  if (topts.include_rate_variance) {
    if (topts.rate_sample_size == 0) throw DomainError("target_ci: rate_sample_size required for rate variance");
    const double z = normal_quantile(0.5 * (1.0 + opts.level));
    const double var_rate = rate * (1.0 - rate) / static_cast<double>(topts.rate_sample_size);
    const double sd_s = r.half_width / z;
    const double sd = std::sqrt(r.center * r.center * var_rate + rate * rate * sd_s * sd_s);
    r.half_width = z * sd * n_total;
    r.center *= scale;
    r.scale_note += "; count scale with binomial rate variance (not part of the plug-in)";
  } else {
    r.center *= scale;
    r.half_width *= scale;
    r.scale_note += "; count scale, rate held fixed";
  }
  r.lo = std::max(0.0, r.center - r.half_width);
  r.hi = std::min(n_total, r.center + r.half_width);
  return r;
}

}  // namespace potmde
