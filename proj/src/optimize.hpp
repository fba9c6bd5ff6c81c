#pragma once

// Small dense optimizers used by the fitters. Not part of the public API.

#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace potmde::detail {

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  std::vector<double> project(std::vector<double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::min(hi[i], std::max(lo[i], x[i]));
    return x;
  }
  bool near_edge(const std::vector<double>& x, double rel) const {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double w = rel * (hi[i] - lo[i]);
      if (x[i] - lo[i] <= w || hi[i] - x[i] <= w) return true;
    }
    return false;
  }
};

struct SimplexOptions {
  double xtol = 1e-9;   // max vertex spread per coordinate, relative to box width
  double ftol = 1e-15;  // relative spread of objective values
  int max_evals = 4000;
};

struct SimplexResult {
  std::vector<double> x;
  double f;
  int evals;
};

/// Nelder-Mead on a box; trial points are projected onto the box.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                          const std::vector<double>& step, const Box& box, const SimplexOptions& opt);

/// Newton iteration on a 2-d root problem with central-difference Jacobian.
/// `accept` may veto a step (e.g. when the objective increases); the step is
/// then halved. Returns the final point.
std::array<double, 2> newton_polish(const std::function<std::array<double, 2>(const std::array<double, 2>&)>& g,
                                    std::array<double, 2> x, const std::array<double, 2>& h,
                                    const std::function<bool(const std::array<double, 2>&,
                                                             const std::array<double, 2>&)>& accept,
                                    double tol, int max_iter);

}  // namespace potmde::detail
