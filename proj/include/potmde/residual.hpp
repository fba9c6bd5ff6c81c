#pragma once

#include <functional>
#include <vector>

#include "potmde/asymptotics.hpp"
#include "potmde/events.hpp"
#include "potmde/mde.hpp"
#include "potmde/step_function.hpp"

namespace potmde {

/// x -> |T(x) - S_fit(x)| for the empirical step T and a fitted (two- or
/// three-parameter) GPD. Piecewise smooth between the step's breakpoints.
class ResidualCurve {
 public:
  ResidualCurve(StepFunction step, GpdParams3 model);

  double operator()(double x) const;

  const StepFunction& step() const { return step_; }
  const GpdParams3& model() const { return model_; }
  /// Last breakpoint; beyond it the residual equals the model survival.
  double upper_bound() const { return step_.size() ? step_.breaks().back() : 0.0; }

  /// Integral over [0, inf) of residual(x) * S(x)^power, exact segment by segment.
  double integral_weighted(double power) const;

 private:
  StepFunction step_;
  GpdParams3 model_;
};

ResidualCurve residuals(const ExceedanceSample& sample, const FitResult& fit);

struct PhiFit {
  double phi = 0.0;
  bool floored = false;  // projection was <= 0 and replaced by the floor
};

inline constexpr double kPhiFloor = 1e-12;

/// Least-squares fit of r(x) ~ phi sqrt(S(x)) over [0, inf):
/// phi = int r sqrt(S) / int S.
PhiFit fit_phi(const ResidualCurve& resid, const FitResult& fit);
/// Same projection for an arbitrary residual function, by adaptive quadrature.
PhiFit fit_phi(const std::function<double(double)>& resid, const FitResult& fit);

CiResult residual_ci(const ExceedanceSample& sample, const FitResult& fit, double x, const CiOptions& opts = {});
/// Variant reusing an already fitted phi.
CiResult residual_ci(const FitResult& fit, double phi, double x, const CiOptions& opts = {});

struct ResidualRow {
  double x;
  double residual;
  double fitted_sd;  // phi * sqrt(S(x))
};

/// Plot data on a grid: breakpoints and their left neighbours, plus n_grid even points up to 1.25 * upper bound.
std::vector<ResidualRow> residual_table(const ResidualCurve& resid, double phi, std::size_t n_grid = 200);

}  // namespace potmde
