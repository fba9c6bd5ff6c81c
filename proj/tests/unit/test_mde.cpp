#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "oracle.hpp"
#include "potmde/error.hpp"
#include "potmde/mde.hpp"
#include "potmde/rng.hpp"

using namespace potmde;
using doctest::Approx;

TEST_CASE("objective against quadrature") {
  const std::vector<double> one{1.0};
  const StepFunction T = StepFunction::from_excesses(one);
  const double want = oracle::J(T, 0.5, 1.0);
  CHECK(std::abs(objective_J(T, GpdParams(0.5, 1.0)) - want) < 1e-10 * want);

  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const auto x = sample(GpdParams(0.3, 1.0), 3 + i, 100 + i);
    const StepFunction S = StepFunction::from_excesses(x);
    const GpdParams t(0.05 + 1.8 * rng.uniform_open(), 0.2 + 3 * rng.uniform_open());
    const double j = objective_J(S, t);
    CHECK(j > 0.0);
    CHECK(std::abs(j - oracle::J(S, t.gamma(), t.sigma())) < 1e-9 * j);
  }
}

TEST_CASE("objective depends on the step function only") {
  const std::vector<double> a{0.5, 1.0, 2.0};
  const std::vector<double> b{0.5, 0.5, 1.0, 1.0, 2.0, 2.0};
  const GpdParams t(0.3, 1.2);
  CHECK(objective_J(StepFunction::from_excesses(a), t) == Approx(objective_J(StepFunction::from_excesses(b), t)));
}

TEST_CASE("score values") {
  CHECK(score_psi(1.0, GpdParams(0.5, 1.0))[1] == Approx(1.0 / 9.0).epsilon(1e-14));
  const std::vector<double> z{1.7};
  const StepFunction T = StepFunction::from_excesses(z);
  const auto a = score_Psi(T, GpdParams(0.4, 2.0));
  const auto b = score_psi(1.7, GpdParams(0.4, 2.0));
  CHECK(a[0] == Approx(b[0]));
  CHECK(a[1] == Approx(b[1]));
  CHECK_THROWS_AS(score_psi(1.0, GpdParams(1.5, 1.0)), DomainError);
}

TEST_CASE("gradient of J is twice the jump-weighted score") {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto x = sample(GpdParams(0.25, 1.0), 15, 200 + i);
    const StepFunction T = StepFunction::from_excesses(x);
    const double g = 0.1 + 0.8 * rng.uniform_open(), s = 0.3 + 2 * rng.uniform_open();
    const auto fd = oracle::grad_fd([&](double gg, double ss) { return oracle::J(T, gg, ss); }, g, s, 1e-5);
    const auto psi = score_Psi(T, GpdParams(g, s));
    for (int c = 0; c < 2; ++c) CHECK(std::abs(2 * psi[c] - fd[c]) < 1e-5 * (std::abs(fd[c]) + 1e-3));
  }
}

TEST_CASE("score has mean zero at the truth") {
  for (double s : {0.5, 1.0, 2.0})
    for (int i = 1; i <= 9; ++i) {
      const double g = i / 10.0;
      const GpdParams t(g, s);
      for (int c = 0; c < 2; ++c) {
        const double e = oracle::expectation(g, s, [&](double x) { return score_psi(x, t)[c]; });
        CHECK(std::abs(e) < 1e-8);
      }
    }
}

TEST_CASE("moment initialiser") {
  const GpdParams p = init_params(2.0, 8.0);
  CHECK(p.gamma() == Approx(0.25));
  CHECK(p.sigma() == Approx(1.5));
  const std::vector<double> flat(10, 3.0);
  const GpdParams q = init_params(std::span<const double>(flat));
  CHECK(q.gamma() == Approx(0.1));
  CHECK(q.sigma() == Approx(3.0));
  const GpdParams r = init_params(1.0, 1e9);
  CHECK(r.gamma() <= 0.99);
}

TEST_CASE("MDE fit recovers the truth and is stationary") {
  const GpdParams t0(0.2, 1.0);
  const auto x = sample(t0, 10000, 77);
  const FitResult f = fit_mde(std::span<const double>(x));
  CHECK(f.converged);
  CHECK(std::abs(f.gamma - 0.2) < 0.055);
  CHECK(std::abs(f.sigma - 1.0) < 0.065);
  CHECK(*f.score_norm < 1e-6);
  const StepFunction T = StepFunction::from_excesses(x);
  CHECK(objective_J(T, f.theta()) <= objective_J(T, t0));
}

TEST_CASE("scale equivariance") {
  const auto x = sample(GpdParams(0.3, 1.0), 500, 9);
  std::vector<double> y(x);
  for (auto& v : y) v *= 7.5;
  const FitResult a = fit_mde(std::span<const double>(x));
  const FitResult b = fit_mde(std::span<const double>(y));
  CHECK(b.gamma == Approx(a.gamma).epsilon(1e-6));
  CHECK(b.sigma == Approx(7.5 * a.sigma).epsilon(1e-6));
}

TEST_CASE("three-parameter fit") {
  const GpdParams3 v(0.3, 0.5, 1.0);
  std::vector<double> y;
  for (int i = 0; i < 10000; ++i) {
    const double p = (i + 0.5) / 10000.0;
    y.push_back(0.5 + 1.0 / 0.3 * std::expm1(-0.3 * std::log1p(-p)));
  }
  const FitResult f = fit_mde3(StepFunction::from_excesses(y), 10000);
  CHECK(std::abs(f.gamma - 0.3) < 0.05);
  CHECK(std::abs(f.mu - 0.5) < 0.05);
  CHECK(std::abs(f.sigma - 1.0) < 0.05);

  const auto x = sample(GpdParams(0.25, 1.0), 800, 4);
  FitOptions o;
  o.fixed_mu = 0.0;
  const StepFunction T = StepFunction::from_excesses(x);
  const FitResult a = fit_mde3(T, 800, std::nullopt, o);
  const FitResult b = fit_mde(T, 800);
  CHECK(a.gamma == Approx(b.gamma).epsilon(1e-5));
  CHECK(a.sigma == Approx(b.sigma).epsilon(1e-5));
}

TEST_CASE("three-parameter fit admits a negative location") {
  // count-ratio target that starts below one, as the curve of a run-pattern event can
  const GpdParams3 v(0.2, -0.3, 0.8);
  const double head = survival3(v, 0.0);
  std::vector<double> br, lv;
  for (int i = 1; i <= 2000; ++i) {
    const double level = head * (1.0 - i / 2000.0);
    br.push_back(-0.3 + 0.8 / 0.2 * std::expm1(-0.2 * std::log(std::max(level, 1e-300))));
    lv.push_back(level);
  }
  lv.back() = 0.0;
  br.back() = br[br.size() - 2] + 1.0;
  const FitResult f = fit_mde3(StepFunction(head, br, lv), 2000);
  CHECK(f.mu < 0.0);
  CHECK(std::abs(f.mu + 0.3) < 0.05);
}

TEST_CASE("MLE") {
  const GpdParams t0(0.2, 1.0);
  const auto x = sample(t0, 10000, 78);
  const FitResult f = fit_mle(std::span<const double>(x));
  CHECK(std::abs(f.gamma - 0.2) < 0.03);
  CHECK(log_likelihood(x, f.theta()) >= log_likelihood(x, t0));
  CHECK(f.converged);
}

TEST_CASE("fit errors") {
  const std::vector<double> few{1.0, 2.0};
  CHECK_THROWS_AS(fit_mde(std::span<const double>(few)), DataError);
  const std::vector<double> none;
  CHECK_THROWS(fit_mde(std::span<const double>(none)));
}
