#include "potmde/sim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include "potmde/error.hpp"
#include "potmde/residual.hpp"
#include "potmde/rng.hpp"

namespace potmde {

void MaxLinearModel::validate() const {
  if (factors == 0 || dim == 0) throw DomainError("max-linear model needs K >= 1 and d >= 1");
  if (A.size() != factors * dim) throw DomainError("coefficient matrix must have K * d entries");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("Frechet index alpha must be positive");
  for (double v : A)
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("coefficients must be finite and nonnegative");
  for (std::size_t j = 0; j < dim; ++j) {
    bool any = false;
    for (std::size_t a = 0; a < factors; ++a) any = any || coef(a, j) > 0.0;
    if (!any) throw DomainError("coordinate " + std::to_string(j + 1) + " has no positive coefficient");
  }
}

double MaxLinearModel::exponent_mass() const {
  double m = 0.0;
  for (std::size_t a = 0; a < factors; ++a) {
    double mx = 0.0;
    for (std::size_t j = 0; j < dim; ++j) mx = std::max(mx, coef(a, j));
    m += std::pow(mx, alpha);
  }
  return m;
}

PanelSeries sample_maxlinear(const MaxLinearModel& model, std::size_t n, std::uint64_t seed) {
  model.validate();
  Rng rng(seed);
  Run run;
  run.id = "maxlinear";
  run.rows = n;
  run.cols = model.dim;
  run.values.assign(n * model.dim, 0.0);
  std::vector<double> z(model.factors);
  const double inv = -1.0 / model.alpha;
  for (std::size_t t = 0; t < n; ++t) {
    for (auto& v : z) v = std::pow(-std::log(rng.uniform_open()), inv);
    for (std::size_t j = 0; j < model.dim; ++j) {
      double y = 0.0;
      for (std::size_t a = 0; a < model.factors; ++a) y = std::max(y, model.coef(a, j) * z[a]);
      run.values[t * model.dim + j] = y;
    }
  }
  std::vector<Run> runs;
  runs.push_back(std::move(run));
  return PanelSeries(std::move(runs));
}

double analytic_tail(const MaxLinearModel& model, double x) {
  model.validate();
  if (!(x > 0.0)) throw DomainError("analytic_tail: x must be positive");
  return std::pow(x, -model.alpha) * model.exponent_mass();
}

ImpliedGpd implied_gpd(const MaxLinearModel& model) {
  model.validate();
  ImpliedGpd g;
  g.gamma = 1.0 / model.alpha;
  g.sigma = std::pow(model.exponent_mass(), 1.0 / model.alpha) / model.alpha;
  g.in_domain = model.alpha > 1.0;
  return g;
}

MomentStats moment_stats(const std::vector<double>& est, double truth) {
  MomentStats m;
  m.used = est.size();
  if (est.empty()) return m;
  const double r = static_cast<double>(est.size());
  m.mean = std::accumulate(est.begin(), est.end(), 0.0) / r;
  double v = 0.0, e = 0.0;
  for (double x : est) {
    v += (x - m.mean) * (x - m.mean);
    e += (x - truth) * (x - truth);
  }
  m.variance = v / r;
  m.mse = e / r;
  m.bias2 = (m.mean - truth) * (m.mean - truth);
  return m;
}

namespace {

constexpr std::uint64_t kTagCompare = 0xC0FFEE01;
constexpr std::uint64_t kTagMise = 0xC0FFEE02;
constexpr std::uint64_t kTagCoverage = 0xC0FFEE03;
constexpr std::uint64_t kTagClt = 0xC0FFEE04;
constexpr std::uint64_t kTagMaxLinear = 0xC0FFEE05;

struct Outcome {
  double gamma = std::nan("");
  double sigma = std::nan("");
  bool ok = false;
  bool boundary = false;
};

FitOptions serial_fit(const SimOptions& o) {
  FitOptions f = o.fit;
  f.parallel_starts = false;
  return f;
}

template <class F>
Outcome guarded(bool keep_boundary, F&& f) {
  Outcome o;
  try {
    const FitResult r = f();
    o.gamma = r.gamma;
    o.sigma = r.sigma;
    o.boundary = r.at_boundary;
    // Boundary estimates are valid constrained estimates; only unconverged interior fits are dropped.
    o.ok = std::isfinite(r.gamma) && std::isfinite(r.sigma) && (r.converged || (keep_boundary && r.at_boundary));
  } catch (const std::exception&) {
    o.ok = false;
  }
  return o;
}

template <class Body>
void for_each_index(std::size_t n, Execution ex, Body&& body) {
  const long m = static_cast<long>(n);
  const bool par = ex == Execution::Parallel;
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic) if (par)
  for (long i = 0; i < m; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(potmde_sim_err)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

EstimatorCell summarize(const std::vector<Outcome>& outs, double gamma0, double sigma0) {
  EstimatorCell c;
  std::vector<double> g, s;
  for (std::size_t r = 0; r < outs.size(); ++r) {
    if (!outs[r].ok) {
      c.excluded.push_back(r);
      continue;
    }
    g.push_back(outs[r].gamma);
    s.push_back(outs[r].sigma);
    if (outs[r].boundary) ++c.boundary;
  }
  c.gamma = moment_stats(g, gamma0);
  c.sigma = moment_stats(s, sigma0);
  return c;
}

}  // namespace

SimReport mc_compare(const std::vector<double>& gamma_grid, const std::vector<std::size_t>& n_grid,
                     std::size_t reps, std::uint64_t master_seed, const SimOptions& opts) {
  if (reps < 100) throw DomainError("mc_compare needs reps >= 100");
  const std::size_t ng = gamma_grid.size(), nn = n_grid.size();
  const std::size_t total = ng * nn * reps;
  std::vector<Outcome> mde(total), mle(total);
  const FitOptions fo = serial_fit(opts);
  for_each_index(total, opts.execution, [&](std::size_t i) {
    const std::size_t r = i % reps, cell = i / reps;
    const std::size_t ni = cell / ng, gi = cell % ng;
    const GpdParams theta(gamma_grid[gi], 1.0);
    const auto x = sample(theta, n_grid[ni], derive_seed(master_seed, {kTagCompare, gi, ni, r}));
    const std::span<const double> xs(x);
    mde[i] = guarded(opts.keep_boundary, [&] { return fit_mde(xs, std::nullopt, fo); });
    mle[i] = guarded(opts.keep_boundary, [&] { return fit_mle(xs, fo); });
  });
  SimReport rep;
  rep.reps = reps;
  rep.master_seed = master_seed;
  for (std::size_t ni = 0; ni < nn; ++ni)
    for (std::size_t gi = 0; gi < ng; ++gi) {
      const std::size_t base = (ni * ng + gi) * reps;
      SimCell c;
      c.gamma = gamma_grid[gi];
      c.n = n_grid[ni];
      c.mde = summarize({mde.begin() + base, mde.begin() + base + reps}, c.gamma, 1.0);
      c.mle = summarize({mle.begin() + base, mle.begin() + base + reps}, c.gamma, 1.0);
      rep.cells.push_back(std::move(c));
    }
  return rep;
}

std::vector<MiseRow> mise_survival(const GpdParams& theta0, const std::vector<std::size_t>& n_grid, std::size_t reps,
                                   std::uint64_t master_seed, std::optional<double> x_hi, const SimOptions& opts) {
  if (reps < 2) throw DomainError("mise_survival needs reps >= 2");
  const double hi = x_hi.value_or(quantile(theta0, 0.999));
  if (!(hi > 0.0)) throw DomainError("MISE range must be positive");
  constexpr std::size_t kPoints = 2000;
  std::vector<double> grid(kPoints), s0(kPoints);
  for (std::size_t i = 0; i < kPoints; ++i) {
    grid[i] = hi * static_cast<double>(i) / static_cast<double>(kPoints - 1);
    s0[i] = survival(theta0, grid[i]);
  }
  const double h = hi / static_cast<double>(kPoints - 1);
  const auto ise = [&](const GpdParams& t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < kPoints; ++i) {
      const double d = survival(t, grid[i]) - s0[i];
      acc += (i == 0 || i + 1 == kPoints ? 0.5 : 1.0) * d * d;
    }
    return acc * h;
  };
  const std::size_t nn = n_grid.size();
  std::vector<double> e_mde(nn * reps, std::nan("")), e_mle(nn * reps, std::nan(""));
  const FitOptions fo = serial_fit(opts);
  for_each_index(nn * reps, opts.execution, [&](std::size_t i) {
    const std::size_t ni = i / reps, r = i % reps;
    const auto x = sample(theta0, n_grid[ni], derive_seed(master_seed, {kTagMise, ni, r}));
    const std::span<const double> xs(x);
    const Outcome a = guarded(opts.keep_boundary, [&] { return fit_mde(xs, std::nullopt, fo); });
    const Outcome b = guarded(opts.keep_boundary, [&] { return fit_mle(xs, fo); });
    if (a.ok) e_mde[i] = ise(GpdParams(a.gamma, a.sigma));
    if (b.ok) e_mle[i] = ise(GpdParams(b.gamma, b.sigma));
  });
  std::vector<MiseRow> out;
  for (std::size_t ni = 0; ni < nn; ++ni)
    for (FitMethod m : {FitMethod::Mde2, FitMethod::Mle}) {
      const auto& e = m == FitMethod::Mle ? e_mle : e_mde;
      std::vector<double> v;
      for (std::size_t r = 0; r < reps; ++r)
        if (std::isfinite(e[ni * reps + r])) v.push_back(e[ni * reps + r]);
      MiseRow row;
      row.n = n_grid[ni];
      row.method = m;
      row.used = v.size();
      row.excluded = reps - v.size();
      if (!v.empty()) {
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        row.mise = mean;
        row.std_error =
            v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
      }
      out.push_back(row);
    }
  return out;
}

const char* to_string(CiVariant v) {
  switch (v) {
    case CiVariant::PlugIn:
      return "plug-in";
    case CiVariant::Residual:
      return "residual";
    case CiVariant::StrictPaper:
      return "strict-paper";
  }
  return "?";
}

std::vector<CoverageRow> coverage_study(const GpdParams& theta0, std::size_t k, const std::vector<double>& x_levels,
                                        double level, std::size_t reps, std::uint64_t master_seed,
                                        const SimOptions& opts) {
  if (reps < 1) throw DomainError("coverage_study needs reps >= 1");
  if (!(level > 0.5 && level < 1.0)) throw DomainError("confidence level must lie in (0.5, 1)");
  const std::size_t nx = x_levels.size();
  constexpr std::size_t kVariants = 3;
  // per replicate: nx * kVariants hit flags, -1 for an excluded replicate
  std::vector<signed char> hit(reps * nx * kVariants, -1);
  const FitOptions fo = serial_fit(opts);
  CiOptions plug;
  plug.level = level;
  plug.min_k = 1;
  CiOptions strict = plug;
  strict.convention = CiConvention::StrictPaper;
  for_each_index(reps, opts.execution, [&](std::size_t r) {
    const auto x = sample(theta0, k, derive_seed(master_seed, {kTagCoverage, k, r}));
    try {
      const FitResult f = fit_mde(std::span<const double>(x), std::nullopt, fo);
      if (!(f.converged || (opts.keep_boundary && f.at_boundary))) return;
      const PhiFit phi = fit_phi(ResidualCurve(StepFunction::from_excesses(x), f.params3()), f);
      for (std::size_t j = 0; j < nx; ++j) {
        const double truth = survival(theta0, x_levels[j]);
        const CiResult a = confidence_interval(f, x_levels[j], plug);
        const CiResult b = residual_ci(f, phi.phi, x_levels[j], plug);
        const CiResult c = confidence_interval(f, x_levels[j], strict);
        signed char* h = &hit[(r * nx + j) * kVariants];
        h[0] = a.lo <= truth && truth <= a.hi;
        h[1] = b.lo <= truth && truth <= b.hi;
        h[2] = c.lo <= truth && truth <= c.hi;
      }
    } catch (const std::exception&) {
    }
  });
  std::vector<CoverageRow> out;
  const CiVariant kinds[kVariants] = {CiVariant::PlugIn, CiVariant::Residual, CiVariant::StrictPaper};
  for (std::size_t j = 0; j < nx; ++j)
    for (std::size_t v = 0; v < kVariants; ++v) {
      std::size_t used = 0, hits = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        const signed char h = hit[(r * nx + j) * kVariants + v];
        if (h < 0) continue;
        ++used;
        hits += static_cast<std::size_t>(h);
      }
      CoverageRow row;
      row.x = x_levels[j];
      row.variant = kinds[v];
      row.used = used;
      if (used) {
        row.coverage = static_cast<double>(hits) / static_cast<double>(used);
        row.std_error = std::sqrt(row.coverage * (1.0 - row.coverage) / static_cast<double>(used));
      }
      out.push_back(row);
    }
  return out;
}

namespace {

CovMatrix2 sample_cov(const std::vector<std::array<double, 2>>& z) {
  const double n = static_cast<double>(z.size());
  if (z.size() < 2) return {};
  double m0 = 0.0, m1 = 0.0;
  for (const auto& v : z) {
    m0 += v[0];
    m1 += v[1];
  }
  m0 /= n;
  m1 /= n;
  CovMatrix2 c;
  for (const auto& v : z) {
    c.a11 += (v[0] - m0) * (v[0] - m0);
    c.a12 += (v[0] - m0) * (v[1] - m1);
    c.a22 += (v[1] - m1) * (v[1] - m1);
  }
  c.a11 /= n - 1.0;
  c.a12 /= n - 1.0;
  c.a22 /= n - 1.0;
  return c;
}

}  // namespace

CltReport clt_study(const GpdParams& theta0, std::size_t k, std::size_t reps, std::uint64_t master_seed,
                    const SimOptions& opts) {
  std::vector<Outcome> a(reps), b(reps);
  const FitOptions fo = serial_fit(opts);
  for_each_index(reps, opts.execution, [&](std::size_t r) {
    const auto x = sample(theta0, k, derive_seed(master_seed, {kTagClt, k, r}));
    const std::span<const double> xs(x);
    a[r] = guarded(opts.keep_boundary, [&] { return fit_mde(xs, std::nullopt, fo); });
    b[r] = guarded(opts.keep_boundary, [&] { return fit_mle(xs, fo); });
  });
  const double rk = std::sqrt(static_cast<double>(k));
  std::vector<std::array<double, 2>> za, zb;
  for (std::size_t r = 0; r < reps; ++r) {
    if (a[r].ok) za.push_back({rk * (a[r].gamma - theta0.gamma()), rk * (a[r].sigma - theta0.sigma())});
    if (b[r].ok) zb.push_back({rk * (b[r].gamma - theta0.gamma()), rk * (b[r].sigma - theta0.sigma())});
  }
  CltReport rep;
  rep.mde = sample_cov(za);
  rep.mle = sample_cov(zb);
  rep.mde_theory = sigma_matrix(theta0);
  rep.mle_theory = sigma_matrix_mle(theta0);
  rep.used_mde = za.size();
  rep.used_mle = zb.size();
  rep.reps = reps;
  return rep;
}

RecoveryReport maxlinear_recovery(const MaxLinearModel& model, std::size_t n, std::size_t reps, double prob,
                                  std::uint64_t master_seed, const SimOptions& opts) {
  model.validate();
  if (!(prob > 0.0 && prob < 1.0)) throw DomainError("threshold probability must lie in (0, 1)");
  const std::size_t above = n - static_cast<std::size_t>(std::ceil(prob * static_cast<double>(n)));
  if (above < 5) throw DomainError("too few points above the threshold quantile");
  RecoveryReport rep;
  rep.implied_gamma = implied_gpd(model).gamma;
  rep.gamma_hat.assign(reps, std::nan(""));
  // Tail check one decade below the threshold exceedance rate.
  rep.tail_level = std::pow(model.exponent_mass() / ((1.0 - prob) / 10.0), 1.0 / model.alpha);
  rep.analytic = analytic_tail(model, rep.tail_level);
  std::vector<std::size_t> tail_hits(reps, 0);
  EventSpec spec;
  spec.kind = EventKind::OrderStat;
  for (std::size_t j = 1; j <= model.dim; ++j) spec.subset.push_back(j);
  spec.order_index = model.dim;  // coordinate maximum
  const FitOptions fo = serial_fit(opts);
  for_each_index(reps, opts.execution, [&](std::size_t r) {
    const PanelSeries panel = sample_maxlinear(model, n, derive_seed(master_seed, {kTagMaxLinear, n, r}));
    const auto curves = event_curve(panel, spec);
    std::vector<double> mx = project(panel, spec).front();
    for (double v : mx) tail_hits[r] += v > rep.tail_level;
    std::sort(mx.begin(), mx.end());
    const double u = mx[n - above - 1];
    try {
      const ExceedanceSample s = exceedances(curves, u);
      const FitResult f = fit_mde(s, std::nullopt, fo);
      if (f.converged || (opts.keep_boundary && f.at_boundary)) rep.gamma_hat[r] = f.gamma;
    } catch (const std::exception&) {
    }
  });
  std::vector<double> ok;
  for (double g : rep.gamma_hat)
    if (std::isfinite(g)) ok.push_back(g);
  if (!ok.empty()) {
    std::sort(ok.begin(), ok.end());
    const std::size_t m = ok.size();
    rep.median_gamma = m % 2 ? ok[m / 2] : 0.5 * (ok[m / 2 - 1] + ok[m / 2]);
  } else {
    rep.median_gamma = std::nan("");
  }
  const double draws = static_cast<double>(n) * static_cast<double>(reps);
  const double p = static_cast<double>(std::accumulate(tail_hits.begin(), tail_hits.end(), std::size_t{0})) / draws;
  rep.empirical_tail = p;
  rep.tail_std_error = std::sqrt(std::max(p, rep.analytic) * (1.0 - p) / draws);
  return rep;
}

}  // namespace potmde
