#pragma once

#include <array>
#include <string>

#include "potmde/gpd.hpp"
#include "potmde/mde.hpp"

namespace potmde {

/// Symmetric 2x2 matrix, ordered (gamma, sigma).
struct CovMatrix2 {
  double a11 = 0.0;
  double a12 = 0.0;
  double a22 = 0.0;

  double det() const { return a11 * a22 - a12 * a12; }
  CovMatrix2 inverse() const;
  std::array<double, 2> eigenvalues() const;  // ascending
  double quad(const std::array<double, 2>& u, const std::array<double, 2>& v) const {
    return a11 * u[0] * v[0] + a12 * (u[0] * v[1] + u[1] * v[0]) + a22 * u[1] * v[1];
  }
};

// Closed forms of the Z-estimator matrices. All require gamma in (0, 1).
CovMatrix2 matrix_U(const GpdParams& theta);
CovMatrix2 matrix_V(const GpdParams& theta);

/// Limiting covariance of sqrt(k)(theta_hat - theta) for the L2 MDE (explicit display).
CovMatrix2 sigma_matrix(const GpdParams& theta);
/// The same matrix assembled as U^-1 V U^-T; throws NumericError if U is near singular.
CovMatrix2 sigma_matrix_sandwich(const GpdParams& theta);

/// (dS/dgamma, dS/dsigma) at excess level x.
std::array<double, 2> gradient_survival(const GpdParams& theta, double x);

/// Asymptotic variance of sqrt(k)(S_hat(x) - S(x)) from the rational-logarithmic
/// closed form; falls back to the quadratic form near removable singularities.
double var_survival(const GpdParams& theta, double x);
/// grad S^T Sigma grad S.
double var_survival_quadratic(const GpdParams& theta, double x);

double cov_kernel(const GpdParams& theta, double x, double x2);

/// Inverse Fisher information of the GPD. The raw overload evaluates the
/// formula without domain checks (the gamma = 0 boundary is allowed).
CovMatrix2 sigma_matrix_mle(double gamma, double sigma);
CovMatrix2 sigma_matrix_mle(const GpdParams& theta);
double var_survival_mle(const GpdParams& theta, double x);
double var_survival_mle_quadratic(const GpdParams& theta, double x);

/// Pointwise MDE / MLE survival-variance ratio; x > 0.
double efficiency_mde_over_mle(const GpdParams& theta, double x);
inline double efficiency_mle_over_mde(const GpdParams& theta, double x) {
  return 1.0 / efficiency_mde_over_mle(theta, x);
}

struct RatioLimits {
  double at_zero;      // x -> 0
  double at_infinity;  // x -> infinity
};
/// Limits of the MDE / MLE ratio; sigma-free. Evaluated as a formula, so
/// gamma = 0 is accepted.
RatioLimits ratio_limits(double gamma);

enum class CiConvention {
  Corrected,    // half-width z * varsigma / sqrt(k)
  StrictPaper,  // half-width sqrt(k) * z * varsigma (as printed; over-covers)
};

struct CiOptions {
  double level = 0.95;
  CiConvention convention = CiConvention::Corrected;
  std::size_t min_k = 30;
};

struct CiResult {
  double center = 0.0;
  double half_width = 0.0;
  double lo = 0.0;  // clipped
  double hi = 0.0;  // clipped
  double level = 0.0;
  double x = 0.0;
  long long k = 0;
  std::string scale_note;
};

double normal_quantile(double p);

/// Interval for S(x) from a plug-in standard deviation at the fitted parameters.
CiResult interval_from_sd(double center, double sd, long long k, double x, const CiOptions& opts);

CiResult confidence_interval(const FitResult& fit, double x, const CiOptions& opts = {});

struct TargetCiOptions {
  bool include_rate_variance = false;  // not part of the plug-in; adds binomial variance of the rate
  std::size_t rate_sample_size = 0;    // number of time points behind the rate
};

/// Interval on the expected-count scale: bounds of the survival interval times n_total * rate.
CiResult target_ci(const FitResult& fit, double x, double n_total, double rate, const CiOptions& opts = {},
                   const TargetCiOptions& topts = {});

}  // namespace potmde
