#include "optimize.hpp"

#include <algorithm>
#include <numeric>

namespace potmde::detail {

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                          const std::vector<double>& step, const Box& box, const SimplexOptions& opt) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> pts(n + 1);
  std::vector<double> fv(n + 1);
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    return f(x);
  };

  pts[0] = box.project(std::move(x0));
  for (std::size_t i = 0; i < n; ++i) {
    pts[i + 1] = pts[0];
    pts[i + 1][i] += step[i];
    if (pts[i + 1][i] > box.hi[i]) pts[i + 1][i] = pts[0][i] - step[i];
    pts[i + 1] = box.project(pts[i + 1]);
  }
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(pts[i]);

  std::vector<std::size_t> order(n + 1);
  for (;;) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n - 1];

    bool small = true;
    for (std::size_t j = 0; j < n && small; ++j) {
      double lo = pts[0][j], hi = pts[0][j];
      for (const auto& p : pts) {
        lo = std::min(lo, p[j]);
        hi = std::max(hi, p[j]);
      }
      small = (hi - lo) <= opt.xtol * (box.hi[j] - box.lo[j]);
    }
    const double fspread = fv[worst] - fv[best];
    if (small || fspread <= opt.ftol * (std::abs(fv[best]) + 1e-300) || evals >= opt.max_evals)
      return {pts[best], fv[best], evals};

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i)
      if (i != worst)
        for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j] / static_cast<double>(n);

    auto along = [&](double t) {
      std::vector<double> x(n);
      for (std::size_t j = 0; j < n; ++j) x[j] = centroid[j] + t * (pts[worst][j] - centroid[j]);
      return box.project(std::move(x));
    };

    const auto xr = along(-1.0);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      const auto xe = along(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        fv[worst] = fe;
      } else {
        pts[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      pts[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    const auto xc = along(outside ? -0.5 : 0.5);
    const double fc = eval(xc);
    if (fc < (outside ? fr : fv[worst])) {
      pts[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < n; ++j) pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
      fv[i] = eval(pts[i]);
    }
  }
}

std::array<double, 2> newton_polish(const std::function<std::array<double, 2>(const std::array<double, 2>&)>& g,
                                    std::array<double, 2> x, const std::array<double, 2>& h,
                                    const std::function<bool(const std::array<double, 2>&,
                                                             const std::array<double, 2>&)>& accept,
                                    double tol, int max_iter) {
  auto norm = [](const std::array<double, 2>& v) { return std::hypot(v[0], v[1]); };
  std::array<double, 2> gx = g(x);
  for (int it = 0; it < max_iter && norm(gx) > tol; ++it) {
    double jac[2][2];
    for (int j = 0; j < 2; ++j) {
      auto xp = x, xm = x;
      xp[j] += h[j];
      xm[j] -= h[j];
      const auto gp = g(xp);
      const auto gm = g(xm);
      for (int i = 0; i < 2; ++i) jac[i][j] = (gp[i] - gm[i]) / (2.0 * h[j]);
    }
    const double det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    if (!std::isfinite(det) || det == 0.0) break;
    const std::array<double, 2> dx{(jac[1][1] * gx[0] - jac[0][1] * gx[1]) / det,
                                   (-jac[1][0] * gx[0] + jac[0][0] * gx[1]) / det};
    bool moved = false;
    for (double t = 1.0; t > 1e-4; t *= 0.5) {
      const std::array<double, 2> xn{x[0] - t * dx[0], x[1] - t * dx[1]};
      if (!accept(x, xn)) continue;
      const auto gn = g(xn);
      if (!(norm(gn) < norm(gx))) continue;
      x = xn;
      gx = gn;
      moved = true;
      break;
    }
    if (!moved) break;
  }
  return x;
}

}  // namespace potmde::detail
