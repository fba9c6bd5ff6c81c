#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>

#include "potmde/events.hpp"
#include "potmde/gpd.hpp"
#include "potmde/step_function.hpp"

namespace potmde {

enum class FitMethod { Mde2, Mde3, Mle };

const char* to_string(FitMethod m);
FitMethod fit_method_from_string(const std::string& name);

struct FitOptions {
  // Compact search box. Sigma bounds are multiples of the target's mean.
  double gamma_min = 0.01;
  double gamma_max = 0.99;
  double sigma_min_factor = 1e-6;
  double sigma_max_factor = 1e6;
  double mu_iqr_factor = 2.0;  // mu in [min(support) - factor * IQR, min(support)]

  int multistart = 3;
  double stationarity_tol = 1e-6;  // converged when |Psi| < tol * (1 + |theta|)
  std::size_t min_k = 5;
  double simplex_xtol = 1e-9;
  int max_evals = 4000;

  std::optional<double> fixed_mu;  // three-parameter fit with mu held fixed
  bool parallel_starts = false;    // run multistart candidates under OpenMP
};

struct FitResult {
  FitMethod method = FitMethod::Mde2;
  double gamma = 0.0;
  double mu = 0.0;  // zero for two-parameter methods
  double sigma = 0.0;
  double objective = 0.0;  // J at optimum (MDE) or negative log-likelihood (MLE)
  std::optional<double> score_norm;  // |Psi_k| for MDE2, |d loglik| / k for MLE
  long long k = 0;
  bool converged = false;
  bool at_boundary = false;
  int evaluations = 0;

  GpdParams theta() const;    // throws for three-parameter fits with mu != 0
  GpdParams3 params3() const { return GpdParams3(gamma, mu, sigma); }
};

/// L2 distance between a step function and the GPD survival, integrated exactly
/// between breakpoints, with the tail past the last breakpoint in closed form.
double objective_J(const StepFunction& target, const GpdParams& theta);
double objective_J3(const StepFunction& target, const GpdParams3& vartheta);

/// Per-observation score whose mean vanishes at any local minimizer of J.
std::array<double, 2> score_psi(double x, const GpdParams& theta);

/// Jump-weighted mean of psi over the breakpoints of the target; for an
/// empirical survival function this is (1/k) sum_j psi(y_j). Equals grad J / 2.
std::array<double, 2> score_Psi(const StepFunction& target, const GpdParams& theta);
std::array<double, 2> score_Psi(const ExceedanceSample& sample, const GpdParams& theta);

/// Moment start: mean = sigma/(1-gamma), var = sigma^2 / ((1-gamma)^2 (1-2 gamma)).
/// Falls back to (0.1, mean) for degenerate input; result is clamped into the box.
GpdParams init_params(double mean, double variance, const FitOptions& opts = {});
GpdParams init_params(std::span<const double> excesses, const FitOptions& opts = {});
GpdParams init_params(const StepFunction& target, const FitOptions& opts = {});

FitResult fit_mde(const StepFunction& target, long long k, std::optional<GpdParams> init = std::nullopt,
                  const FitOptions& opts = {});
FitResult fit_mde(const ExceedanceSample& sample, std::optional<GpdParams> init = std::nullopt,
                  const FitOptions& opts = {});
FitResult fit_mde(std::span<const double> excesses, std::optional<GpdParams> init = std::nullopt,
                  const FitOptions& opts = {});

FitResult fit_mde3(const StepFunction& target, long long k, std::optional<GpdParams3> init = std::nullopt,
                   const FitOptions& opts = {});
FitResult fit_mde3(const ExceedanceSample& sample, std::optional<GpdParams3> init = std::nullopt,
                   const FitOptions& opts = {});

double log_likelihood(std::span<const double> excesses, const GpdParams& theta);

FitResult fit_mle(std::span<const double> excesses, const FitOptions& opts = {});
FitResult fit_mle(const ExceedanceSample& sample, const FitOptions& opts = {});

/// Fit with the chosen method; MLE requires pooled excesses.
FitResult fit(const ExceedanceSample& sample, FitMethod method, const FitOptions& opts = {});

/// Survival of the fitted model (two- or three-parameter) at excess level x.
double fitted_survival(const FitResult& fit, double x);

}  // namespace potmde
