#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "potmde/asymptotics.hpp"
#include "potmde/events.hpp"
#include "potmde/execution.hpp"
#include "potmde/gpd.hpp"
#include "potmde/mde.hpp"

namespace potmde {

/// Y_j = max_a A(a, j) Z_a with iid alpha-Frechet factors Z_a. A is K x d
/// (factor by coordinate), row-major.
struct MaxLinearModel {
  std::size_t factors = 0;  // K
  std::size_t dim = 0;      // d
  std::vector<double> A;
  double alpha = 1.0;

  double coef(std::size_t a, std::size_t j) const { return A[a * dim + j]; }
  void validate() const;
  /// sum_a max_j A(a, j)^alpha
  double exponent_mass() const;
};

PanelSeries sample_maxlinear(const MaxLinearModel& model, std::size_t n, std::uint64_t seed);

/// P(max_j Y_j > x) ~ x^-alpha sum_a max_j A(a, j)^alpha.
double analytic_tail(const MaxLinearModel& model, double x);

struct ImpliedGpd {
  double gamma = 0.0;
  double sigma = 0.0;
  bool in_domain = true;  // false when alpha <= 1 (gamma >= 1)
};

ImpliedGpd implied_gpd(const MaxLinearModel& model);

struct MomentStats {
  double mean = 0.0;
  double mse = 0.0;
  double variance = 0.0;  // 1/R normalisation, so mse == variance + bias2
  double bias2 = 0.0;
  std::size_t used = 0;
};

/// Moments of estimates around a true value.
MomentStats moment_stats(const std::vector<double>& est, double truth);

struct EstimatorCell {
  MomentStats gamma;
  MomentStats sigma;
  std::size_t boundary = 0;          // kept: constrained estimate on the box edge
  std::vector<std::size_t> excluded;  // failed or non-finite replicates
};

struct SimCell {
  double gamma = 0.0;
  std::size_t n = 0;
  EstimatorCell mde;
  EstimatorCell mle;
};

struct SimReport {
  std::vector<SimCell> cells;  // gamma-major within n
  std::size_t reps = 0;
  std::uint64_t master_seed = 0;
};

struct SimOptions {
  FitOptions fit;
  // Boundary fits are flagged unconverged by the fitter; by default they are kept
  // as constrained estimates and counted. false drops them with the failures.
  bool keep_boundary = true;
  Execution execution = Execution::Serial;
};

/// Both estimators on the same iid GPD(gamma, 1) samples of size n.
SimReport mc_compare(const std::vector<double>& gamma_grid, const std::vector<std::size_t>& n_grid,
                     std::size_t reps, std::uint64_t master_seed, const SimOptions& opts = {});

struct MiseRow {
  std::size_t n = 0;
  FitMethod method = FitMethod::Mde2;
  double mise = 0.0;
  double std_error = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;
};

/// Integrated squared error of the fitted survival on [x_lo, x_hi] by a
/// 2000-point trapezoid; x_hi defaults to the 0.999 quantile of theta0.
std::vector<MiseRow> mise_survival(const GpdParams& theta0, const std::vector<std::size_t>& n_grid, std::size_t reps,
                                   std::uint64_t master_seed, std::optional<double> x_hi = std::nullopt,
                                   const SimOptions& opts = {});

enum class CiVariant { PlugIn, Residual, StrictPaper };
const char* to_string(CiVariant v);

struct CoverageRow {
  double x = 0.0;
  CiVariant variant = CiVariant::PlugIn;
  double coverage = 0.0;
  double std_error = 0.0;  // binomial
  std::size_t used = 0;
};

std::vector<CoverageRow> coverage_study(const GpdParams& theta0, std::size_t k, const std::vector<double>& x_levels,
                                        double level, std::size_t reps, std::uint64_t master_seed,
                                        const SimOptions& opts = {});

struct CltReport {
  CovMatrix2 mde;  // sample covariance of sqrt(k)(theta_hat - theta0)
  CovMatrix2 mle;
  CovMatrix2 mde_theory;
  CovMatrix2 mle_theory;
  std::size_t used_mde = 0;
  std::size_t used_mle = 0;
  std::size_t reps = 0;
};

CltReport clt_study(const GpdParams& theta0, std::size_t k, std::size_t reps, std::uint64_t master_seed,
                    const SimOptions& opts = {});

struct RecoveryReport {
  std::vector<double> gamma_hat;  // per replicate, NaN on failure
  double median_gamma = 0.0;
  double implied_gamma = 0.0;
  // tail check on the first replicate at the fitted threshold level
  double tail_level = 0.0;
  double empirical_tail = 0.0;
  double analytic = 0.0;
  double tail_std_error = 0.0;
};

/// Fit MDE to exceedances of max_j Y_j over its empirical quantile at prob.
RecoveryReport maxlinear_recovery(const MaxLinearModel& model, std::size_t n, std::size_t reps, double prob,
                                  std::uint64_t master_seed, const SimOptions& opts = {});

}  // namespace potmde
