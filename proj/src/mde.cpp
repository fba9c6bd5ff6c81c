#include "potmde/mde.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <vector>

#include "optimize.hpp"
#include "potmde/error.hpp"

namespace potmde {

namespace {

// Cumulative integrals of S and S^2 over [0, x] for the two-parameter model.
struct Primitives {
  double s1;
  double s2;
};

inline Primitives primitives(double gamma, double sigma, double x) {
  if (x == 0.0) return {0.0, 0.0};
  const double onepz = 1.0 + gamma * x / sigma;
  const double t = std::log1p(gamma * x / sigma);
  const double s = std::exp(-t / gamma);
  const double d1 = 1.0 - gamma;
  const double s1 = std::abs(d1) < 1e-12 ? sigma * t / gamma : sigma * (1.0 - onepz * s) / d1;
  const double s2 = sigma * (1.0 - onepz * s * s) / (2.0 - gamma);
  return {s1, s2};
}

void require_estimation_domain(const GpdParams& theta, const char* what) {
  if (!(theta.gamma() < 1.0))
    throw DomainError(std::string(what) + ": gamma must lie in (0, 1), got " + std::to_string(theta.gamma()));
}

double norm2(const std::array<double, 2>& v) { return std::hypot(v[0], v[1]); }

struct SearchBox2 {
  double g_lo, g_hi, ls_lo, ls_hi;
};

SearchBox2 make_box(double mean, const FitOptions& opts) {
  if (!(mean > 0.0) || !std::isfinite(mean)) throw DataError("target has no positive mean");
  if (!(opts.gamma_min > 0.0 && opts.gamma_max < 1.0 && opts.gamma_min < opts.gamma_max))
    throw DomainError("gamma search bounds must satisfy 0 < min < max < 1");
  return {opts.gamma_min, opts.gamma_max, std::log(mean * opts.sigma_min_factor), std::log(mean * opts.sigma_max_factor)};
}

// Starting points: the initializer plus alternating perturbations.
std::vector<std::array<double, 2>> start_points(double gamma, double log_sigma, int count) {
  std::vector<std::array<double, 2>> out{{gamma, log_sigma}};
  for (int i = 1; i < count; ++i) {
    const double sign = (i % 2 == 1) ? 1.0 : -1.0;
    const double mag = 0.15 * ((i + 1) / 2);
    out.push_back({gamma + sign * mag, log_sigma - sign * 0.3 * ((i + 1) / 2)});
  }
  return out;
}

struct Candidate {
  std::vector<double> x;
  double f;
  int evals;
};

// Lowest objective wins; ties go to the smaller gamma (coordinate 0).
const Candidate& best_of(const std::vector<Candidate>& cands) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < cands.size(); ++i) {
    const auto& c = cands[i];
    const auto& b = cands[best];
    if (c.f < b.f || (c.f == b.f && c.x[0] < b.x[0])) best = i;
  }
  return cands[best];
}

std::vector<Candidate> run_starts(const std::function<double(const std::vector<double>&)>& f,
                                  const std::vector<std::vector<double>>& starts, const std::vector<double>& step,
                                  const detail::Box& box, const FitOptions& opts) {
  detail::SimplexOptions so;
  so.xtol = opts.simplex_xtol;
  so.max_evals = opts.max_evals;
  std::vector<Candidate> cands(starts.size());
  const auto n = static_cast<long>(starts.size());
  std::exception_ptr err;
#pragma omp parallel for schedule(static) if (opts.parallel_starts)
  for (long i = 0; i < n; ++i) {
    try {
      auto r = detail::nelder_mead(f, starts[static_cast<std::size_t>(i)], step, box, so);
      cands[static_cast<std::size_t>(i)] = Candidate{std::move(r.x), r.f, r.evals};
    } catch (...) {
#pragma omp critical(potmde_starts_err)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return cands;
}

}  // namespace

const char* to_string(FitMethod m) {
  switch (m) {
    case FitMethod::Mde2: return "mde2";
    case FitMethod::Mde3: return "mde3";
    case FitMethod::Mle: return "mle";
  }
  return "?";
}

FitMethod fit_method_from_string(const std::string& name) {
  if (name == "mde2" || name == "mde") return FitMethod::Mde2;
  if (name == "mde3") return FitMethod::Mde3;
  if (name == "mle") return FitMethod::Mle;
  throw DataError("unknown fit method '" + name + "'");
}

GpdParams FitResult::theta() const {
  if (method == FitMethod::Mde3 && mu != 0.0)
    throw UnsupportedError("three-parameter fit has no two-parameter representation");
  return GpdParams(gamma, sigma);
}

double objective_J(const StepFunction& target, const GpdParams& theta) {
  const double g = theta.gamma();
  const double s = theta.sigma();
  double acc = 0.0;
  double prev_b = 0.0;
  Primitives prev{0.0, 0.0};
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double b = target.breaks()[i];
    const double v = target.level_before(i);
    const Primitives cur = primitives(g, s, b);
    acc += v * v * (b - prev_b) - 2.0 * v * (cur.s1 - prev.s1) + (cur.s2 - prev.s2);
    prev_b = b;
    prev = cur;
  }
  // beyond the last breakpoint the target is zero
  acc += s / (2.0 - g) - prev.s2;
  return std::max(acc, 0.0);
}

double objective_J3(const StepFunction& target, const GpdParams3& vartheta) {
  double acc = 0.0;
  double prev_b = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double b = target.breaks()[i];
    const double v = target.level_before(i);
    acc += v * v * (b - prev_b) - 2.0 * v * integral_survival3_power(vartheta, 1.0, prev_b, b) +
           integral_survival3_power(vartheta, 2.0, prev_b, b);
    prev_b = b;
  }
  acc += integral_survival3_power(vartheta, 2.0, prev_b, Limit::infinity());
  return std::max(acc, 0.0);
}

std::array<double, 2> score_psi(double x, const GpdParams& theta) {
  require_estimation_domain(theta, "score_psi");
  if (!(x >= 0.0)) throw DomainError("score_psi: x must be >= 0");
  const double g = theta.gamma();
  const double s = theta.sigma();
  const double w = s + g * x;
  const double log_term = std::log1p(g * x / s);
  const double r = std::exp(-log_term / g);  // (sigma / (sigma + gamma x))^(1/gamma)
  const double psi_g = s / (2.0 * (g - 2.0) * (g - 2.0)) +
                       (-g * g * s + r * (g * (g * s + (2.0 * g - 1.0) * x) - (g - 1.0) * w * log_term)) /
                           ((g - 1.0) * (g - 1.0) * g * g);
  const double psi_s = -1.0 / (2.0 * (g - 2.0)) - ((s + x) * r - s) / ((g - 1.0) * s);
  return {psi_g, psi_s};
}

std::array<double, 2> score_Psi(const StepFunction& target, const GpdParams& theta) {
  require_estimation_domain(theta, "score_Psi");
  std::array<double, 2> acc{0.0, 0.0};
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double w = target.jump(i);
    if (w == 0.0) continue;
    const auto p = score_psi(target.breaks()[i], theta);
    acc[0] += w * p[0];
    acc[1] += w * p[1];
  }
  // mass not released by the step (head < 1) sits at x = 0 where psi(0) applies
  const double rest = 1.0 - target.head();
  if (rest != 0.0) {
    const auto p0 = score_psi(0.0, theta);
    acc[0] += rest * p0[0];
    acc[1] += rest * p0[1];
  }
  return acc;
}

std::array<double, 2> score_Psi(const ExceedanceSample& sample, const GpdParams& theta) {
  if (sample.total_k == 0) throw DataError("score_Psi: empty sample");
  return score_Psi(sample.pooled_step, theta);
}

GpdParams init_params(double mean, double variance, const FitOptions& opts) {
  if (!(mean > 0.0) || !std::isfinite(mean)) throw DataError("init_params: mean must be positive");
  double gamma = 0.1;
  double sigma = mean;
  if (variance > 0.0 && std::isfinite(variance)) {
    gamma = 0.5 * (1.0 - mean * mean / variance);
    sigma = mean * (1.0 - gamma);
  }
  gamma = std::clamp(gamma, opts.gamma_min, opts.gamma_max);
  if (!(sigma > 0.0)) sigma = mean * (1.0 - gamma);
  sigma = std::clamp(sigma, mean * opts.sigma_min_factor, mean * opts.sigma_max_factor);
  return GpdParams(gamma, sigma);
}

GpdParams init_params(std::span<const double> excesses, const FitOptions& opts) {
  if (excesses.empty()) throw DataError("init_params: empty sample");
  double mean = 0.0;
  for (double y : excesses) mean += y;
  mean /= static_cast<double>(excesses.size());
  double var = 0.0;
  for (double y : excesses) var += (y - mean) * (y - mean);
  var /= static_cast<double>(excesses.size());
  if (excesses.size() < 2) var = 0.0;
  return init_params(mean, var, opts);
}

GpdParams init_params(const StepFunction& target, const FitOptions& opts) {
  const double mean = target.integral();
  const double var = target.second_moment() - mean * mean;
  return init_params(mean, var, opts);
}

FitResult fit_mde(const StepFunction& target, long long k, std::optional<GpdParams> init, const FitOptions& opts) {
  if (k <= 0) throw DataError("fit_mde: empty sample");
  if (static_cast<std::size_t>(k) < opts.min_k)
    throw DataError("fit_mde: k = " + std::to_string(k) + " exceedances, need at least min_k = " +
                    std::to_string(opts.min_k));
  const double mean = target.integral();
  const SearchBox2 sb = make_box(mean, opts);
  const detail::Box box{{sb.g_lo, sb.ls_lo}, {sb.g_hi, sb.ls_hi}};
  const GpdParams start = init ? *init : init_params(target, opts);

  auto J = [&](const std::vector<double>& x) { return objective_J(target, GpdParams(x[0], std::exp(x[1]))); };
  std::vector<std::vector<double>> starts;
  for (const auto& p : start_points(start.gamma(), std::log(start.sigma()), std::max(1, opts.multistart)))
    starts.push_back(box.project({p[0], p[1]}));
  const auto cands = run_starts(J, starts, {0.05, 0.2}, box, opts);
  const Candidate& best = best_of(cands);
  int evals = 0;
  for (const auto& c : cands) evals += c.evals;

  // Newton refinement on Psi = grad J / 2 in (gamma, sigma), never increasing J.
  std::array<double, 2> x{best.x[0], std::exp(best.x[1])};
  double jx = best.f;
  auto inside = [&](const std::array<double, 2>& p) {
    return p[0] >= sb.g_lo && p[0] <= sb.g_hi && p[1] > 0.0 && std::log(p[1]) >= sb.ls_lo && std::log(p[1]) <= sb.ls_hi;
  };
  auto psi = [&](const std::array<double, 2>& p) {
    ++evals;
    return score_Psi(target, GpdParams(p[0], p[1]));
  };
  auto accept = [&](const std::array<double, 2>&, const std::array<double, 2>& xn) {
    if (!inside(xn)) return false;
    const double jn = objective_J(target, GpdParams(xn[0], xn[1]));
    ++evals;
    if (jn <= jx * (1.0 + 1e-12) + 1e-300) {
      jx = std::min(jx, jn);
      return true;
    }
    return false;
  };
  const double theta_norm = std::hypot(x[0], x[1]);
  const double tol = opts.stationarity_tol * (1.0 + theta_norm);
  x = detail::newton_polish(psi, x, {1e-6, 1e-6 * x[1]}, accept, 1e-3 * tol, 30);

  FitResult r;
  r.method = FitMethod::Mde2;
  r.gamma = x[0];
  r.sigma = x[1];
  r.objective = objective_J(target, GpdParams(x[0], x[1]));
  r.k = k;
  r.evaluations = evals;
  r.score_norm = norm2(score_Psi(target, GpdParams(x[0], x[1])));
  r.at_boundary = box.near_edge({x[0], std::log(x[1])}, 1e-6);
  r.converged = !r.at_boundary && *r.score_norm < opts.stationarity_tol * (1.0 + std::hypot(x[0], x[1]));
  return r;
}

FitResult fit_mde(const ExceedanceSample& sample, std::optional<GpdParams> init, const FitOptions& opts) {
  return fit_mde(sample.pooled_step, sample.total_k, init, opts);
}

FitResult fit_mde(std::span<const double> excesses, std::optional<GpdParams> init, const FitOptions& opts) {
  if (excesses.empty()) throw DataError("fit_mde: empty sample");
  return fit_mde(StepFunction::from_excesses(excesses), static_cast<long long>(excesses.size()), init, opts);
}

FitResult fit_mde3(const StepFunction& target, long long k, std::optional<GpdParams3> init, const FitOptions& opts) {
  if (k <= 0) throw DataError("fit_mde3: empty sample");
  if (static_cast<std::size_t>(k) < opts.min_k)
    throw DataError("fit_mde3: k = " + std::to_string(k) + " exceedances, need at least min_k = " +
                    std::to_string(opts.min_k));
  const double mean = target.integral();
  const SearchBox2 sb = make_box(mean, opts);
  const double support_min = target.first_drop();
  const double iqr = target.first_at_or_below(0.25) - target.first_at_or_below(0.75);
  double mu_lo = support_min - opts.mu_iqr_factor * std::max(iqr, 1e-12 * mean);
  double mu_hi = support_min;
  if (opts.fixed_mu) mu_lo = mu_hi = *opts.fixed_mu;

  GpdParams3 start = init ? *init : GpdParams3(init_params(target, opts).gamma(), std::clamp(0.0, mu_lo, mu_hi),
                                               init_params(target, opts).sigma());
  const bool free_mu = !opts.fixed_mu;
  const double mu_fixed = opts.fixed_mu.value_or(0.0);

  std::vector<Candidate> cands;
  if (free_mu) {
    const detail::Box box{{sb.g_lo, mu_lo, sb.ls_lo}, {sb.g_hi, mu_hi, sb.ls_hi}};
    auto J = [&](const std::vector<double>& x) {
      return objective_J3(target, GpdParams3(x[0], x[1], std::exp(x[2])));
    };
    std::vector<std::vector<double>> starts;
    for (const auto& p : start_points(start.gamma(), std::log(start.sigma()), std::max(1, opts.multistart)))
      starts.push_back(box.project({p[0], start.mu(), p[1]}));
    const double mu_step = std::max(0.1 * (mu_hi - mu_lo), 1e-3 * mean);
    cands = run_starts(J, starts, {0.05, mu_step, 0.2}, box, opts);
    const Candidate& b = best_of(cands);
    FitResult r;
    r.method = FitMethod::Mde3;
    r.gamma = b.x[0];
    r.mu = b.x[1];
    r.sigma = std::exp(b.x[2]);
    r.objective = b.f;
    r.k = k;
    for (const auto& c : cands) r.evaluations += c.evals;
    r.at_boundary = detail::Box{{sb.g_lo, sb.ls_lo}, {sb.g_hi, sb.ls_hi}}.near_edge({b.x[0], b.x[2]}, 1e-6) ||
                    (mu_hi > mu_lo && detail::Box{{mu_lo}, {mu_hi}}.near_edge({b.x[1]}, 1e-6));
    r.converged = !r.at_boundary && r.evaluations < opts.max_evals * static_cast<int>(cands.size());
    return r;
  }

  const detail::Box box{{sb.g_lo, sb.ls_lo}, {sb.g_hi, sb.ls_hi}};
  auto J = [&](const std::vector<double>& x) {
    return objective_J3(target, GpdParams3(x[0], mu_fixed, std::exp(x[1])));
  };
  std::vector<std::vector<double>> starts;
  for (const auto& p : start_points(start.gamma(), std::log(start.sigma()), std::max(1, opts.multistart)))
    starts.push_back(box.project({p[0], p[1]}));
  cands = run_starts(J, starts, {0.05, 0.2}, box, opts);
  const Candidate& b = best_of(cands);
  FitResult r;
  r.method = FitMethod::Mde3;
  r.gamma = b.x[0];
  r.mu = mu_fixed;
  r.sigma = std::exp(b.x[1]);
  r.objective = b.f;
  r.k = k;
  for (const auto& c : cands) r.evaluations += c.evals;
  r.at_boundary = box.near_edge(b.x, 1e-6);
  r.converged = !r.at_boundary && r.evaluations < opts.max_evals * static_cast<int>(cands.size());
  return r;
}

FitResult fit_mde3(const ExceedanceSample& sample, std::optional<GpdParams3> init, const FitOptions& opts) {
  return fit_mde3(sample.pooled_step, sample.total_k, init, opts);
}

double log_likelihood(std::span<const double> excesses, const GpdParams& theta) {
  const double g = theta.gamma();
  const double s = theta.sigma();
  double acc = 0.0;
  for (double y : excesses) {
    if (!(y >= 0.0)) throw DomainError("log_likelihood: excesses must be >= 0");
    acc += std::log1p(g * y / s);
  }
  return -static_cast<double>(excesses.size()) * std::log(s) - (1.0 + 1.0 / g) * acc;
}

FitResult fit_mle(std::span<const double> excesses, const FitOptions& opts) {
  const auto k = static_cast<long long>(excesses.size());
  if (k == 0) throw DataError("fit_mle: empty sample");
  if (excesses.size() < opts.min_k)
    throw DataError("fit_mle: k = " + std::to_string(k) + " exceedances, need at least min_k = " +
                    std::to_string(opts.min_k));
  const GpdParams start = init_params(excesses, opts);
  double mean = 0.0;
  for (double y : excesses) mean += y;
  mean /= static_cast<double>(k);
  const SearchBox2 sb = make_box(mean, opts);
  const detail::Box box{{sb.g_lo, sb.ls_lo}, {sb.g_hi, sb.ls_hi}};
  const double kd = static_cast<double>(k);

  auto nll = [&](const std::vector<double>& x) {
    return -log_likelihood(excesses, GpdParams(x[0], std::exp(x[1]))) / kd;
  };
  std::vector<std::vector<double>> starts;
  for (const auto& p : start_points(start.gamma(), std::log(start.sigma()), std::max(1, opts.multistart)))
    starts.push_back(box.project({p[0], p[1]}));
  const auto cands = run_starts(nll, starts, {0.05, 0.2}, box, opts);
  const Candidate& best = best_of(cands);
  int evals = 0;
  for (const auto& c : cands) evals += c.evals;

  auto score = [&](const std::array<double, 2>& p) {
    ++evals;
    const double g = p[0], s = p[1];
    double sl = 0.0, sr = 0.0;
    for (double y : excesses) {
      sl += std::log1p(g * y / s);
      sr += y / (s + g * y);
    }
    // gradient of the mean log-likelihood
    return std::array<double, 2>{(sl / (g * g) - (1.0 + 1.0 / g) * sr) / kd, (-kd + (g + 1.0) * sr) / (s * kd)};
  };
  std::array<double, 2> x{best.x[0], std::exp(best.x[1])};
  double fx = best.f;
  auto accept = [&](const std::array<double, 2>&, const std::array<double, 2>& xn) {
    if (!(xn[0] >= sb.g_lo && xn[0] <= sb.g_hi && xn[1] > 0.0 && std::log(xn[1]) >= sb.ls_lo &&
          std::log(xn[1]) <= sb.ls_hi))
      return false;
    const double fn = -log_likelihood(excesses, GpdParams(xn[0], xn[1])) / kd;
    if (fn <= fx + 1e-12 * std::abs(fx)) {
      fx = std::min(fx, fn);
      return true;
    }
    return false;
  };
  const double tol = opts.stationarity_tol * (1.0 + std::hypot(x[0], x[1]));
  x = detail::newton_polish(score, x, {1e-6, 1e-6 * x[1]}, accept, 1e-3 * tol, 30);

  FitResult r;
  r.method = FitMethod::Mle;
  r.gamma = x[0];
  r.sigma = x[1];
  r.objective = -log_likelihood(excesses, GpdParams(x[0], x[1])) / kd;
  r.k = k;
  r.evaluations = evals;
  r.score_norm = norm2(score(x));
  r.at_boundary = box.near_edge({x[0], std::log(x[1])}, 1e-6);
  r.converged = !r.at_boundary && *r.score_norm < opts.stationarity_tol * (1.0 + std::hypot(x[0], x[1]));
  return r;
}

FitResult fit_mle(const ExceedanceSample& sample, const FitOptions& opts) {
  if (sample.pooled_excesses.empty())
    throw UnsupportedError("fit_mle needs pooled excesses; run-pattern events only provide a pooled survival");
  return fit_mle(std::span<const double>(sample.pooled_excesses), opts);
}

FitResult fit(const ExceedanceSample& sample, FitMethod method, const FitOptions& opts) {
  switch (method) {
    case FitMethod::Mde2: return fit_mde(sample, std::nullopt, opts);
    case FitMethod::Mde3: return fit_mde3(sample, std::nullopt, opts);
    case FitMethod::Mle: return fit_mle(sample, opts);
  }
  throw DomainError("unknown fit method");
}

double fitted_survival(const FitResult& fit, double x) {
  if (fit.method == FitMethod::Mde3) return survival3(fit.params3(), x);
  return survival(GpdParams(fit.gamma, fit.sigma), x);
}

}  // namespace potmde
