#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dbose/errors.hpp"
#include "dbose/quadrature.hpp"
#include "dbose/specfun.hpp"

#include "helpers.hpp"

using namespace dbose;

namespace {

const MollifierHandle& bump() {
  static const MollifierHandle h = MollifierHandle::standard_bump();
  return h;
}

double cached_c0() {
  static const double c0 = fit_c0(bump());
  return c0;
}

ScalarParams params_at(double theta, double eps) {
  return ScalarParams::make(theta, eps, bump(), cached_c0());
}

}  // namespace

TEST_CASE("ln_gamma anchors and recurrence") {
  CHECK(ln_gamma(1.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(ln_gamma(0.5) == doctest::Approx(std::log(std::sqrt(M_PI))).epsilon(1e-13));
  CHECK(ln_gamma(5.0) == doctest::Approx(std::log(24.0)).epsilon(1e-13));
  for (double u = 0.1; u <= 10.0; u += 0.3)
    CHECK(std::abs(ln_gamma(u + 1.0) - ln_gamma(u) - std::log(u)) < 1e-12);
  CHECK_THROWS_AS(ln_gamma(0.0), std::domain_error);
  CHECK_THROWS_AS(ln_gamma(-1.0), std::domain_error);
}

TEST_CASE("volterra j at t=1, theta=0 (reciprocal-gamma integral)") {
  const JResult r = volterra_j(1.0, 0.0);
  CHECK(r.value == doctest::Approx(2.8077702420285).epsilon(1e-9));
  CHECK(r.rel_err < 1e-8);
  CHECK_THROWS_AS(volterra_j(0.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(volterra_j(-1.0, 0.0), std::domain_error);
}

TEST_CASE("volterra j is increasing in theta at t=1") {
  CHECK(volterra_j(1.0, -0.5).value < volterra_j(1.0, 0.0).value);
  CHECK(volterra_j(1.0, 0.0).value < volterra_j(1.0, 0.7).value);
}

TEST_CASE("Laplace identity of j") {
  // int_0^T e^{-lam t} j(t) dt -> 1/(log lam - theta) at lam = e^{theta+2}
  for (double theta : {-1.0, 0.0, 1.0}) {
    const double lam = std::exp(theta + 2.0);
    const double lt = dbose_test::j_laplace_numeric(lam, theta, 7.0);
    CHECK(lt == doctest::Approx(0.5).epsilon(1e-5));
  }
}

TEST_CASE("JTable matches direct quadrature to 1e-6") {
  const JTable jt(0.0, 1e-6, 32.0, 420);
  for (double t : {1.3e-6, 1e-4, 0.01, 0.3, 1.0, 5.0, 31.0}) {
    CHECK(jt(t) == doctest::Approx(jt.direct(t)).epsilon(1e-6));
  }
  // outside the window falls back to direct evaluation
  CHECK(jt(100.0) == doctest::Approx(jt.direct(100.0)).epsilon(1e-12));
}

TEST_CASE("D(lambda) anchors, monotonicity, asymptote") {
  constexpr double g = 0.57721566490153286;
  CHECK(d_lambda(0.0) ==
        doctest::Approx(2.0 * std::log(2.0) - g).epsilon(1e-10));
  CHECK(d_lambda(0.5) < d_lambda(1.0));
  CHECK(d_lambda(1.0) < d_lambda(10.0));
  CHECK(std::abs(d_lambda(1e8) - std::log(1e8)) < 1e-3);
  CHECK_THROWS_AS(d_lambda(-1.0), std::domain_error);
}

TEST_CASE("boundary values of D") {
  // continuity at the branch point
  const BoundaryValue b = d_boundary(1e-6);
  CHECK(std::abs(b.re - d_lambda(0.0)) + std::abs(b.im) < 1e-4);
  // Im in (0, pi), |pi - im| bounded over a wide scan
  double maxdev = 0.0;
  for (double x = 1e-3; x <= 1e6; x *= 10.0) {
    const BoundaryValue v = d_boundary(x);
    CHECK(v.im > 0.0);
    CHECK(v.im < M_PI);
    maxdev = std::max(maxdev, std::abs(M_PI - v.im));
  }
  CHECK(maxdev <= M_PI);
  // Re(x) <= log x + C for x >= 1
  for (double x = 1.0; x <= 1e6; x *= 10.0) {
    const BoundaryValue v = d_boundary(x);
    CHECK(v.re <= std::log(x) + 1.5);
  }
  CHECK_THROWS_AS(d_boundary(0.0), std::domain_error);
}

TEST_CASE("scalar params invariants") {
  const ScalarParams p = params_at(0.0, 0.1);
  CHECK(p.beta_eps > 0.0);
  CHECK(p.c0 > 0.0);
  // c1 self-consistency: e^{gamma + D(0) + 1} = 4e
  CHECK(std::abs(p.c1 - 4.0 * M_E) < 1e-6);
  CHECK_THROWS_AS(ScalarParams::make(0.0, 1.5, bump()), std::domain_error);
}

TEST_CASE("C_eps: cross-mode agreement, positivity, smallness past c1") {
  for (double eps : {0.2, 0.1, 0.05}) {
    const ScalarParams p = params_at(0.0, eps);
    for (double lam : {0.5, 1.0, p.c1, 2.0 * p.c1, 100.0}) {
      const double ci = c_eps(lam, p, CepsMode::integral);
      const double cc = c_eps(lam, p, CepsMode::closed);
      CHECK(std::abs(ci - cc) / ci < 1e-8);
      CHECK(ci > 0.0);
      if (lam > p.c1) CHECK(cc < 1.0);
    }
  }
  const ScalarParams p = params_at(0.0, 0.1);
  CHECK_THROWS_AS(c_eps(0.0, p, CepsMode::closed), std::domain_error);
}

TEST_CASE("b(u): normalization, monotone decay, bounded u b(u)") {
  CHECK(b_overlap(0.0, bump()) == doctest::Approx(1.0).epsilon(1e-7));
  double prev = 2.0;
  for (double u = 0.0; u <= 50.0; u += 0.5) {
    const double b = b_overlap(u, bump());
    CHECK(b < prev);
    prev = b;
  }
  double sup = 0.0;
  for (double u = 1.0; u <= 1e4; u *= 1.6)
    sup = std::max(sup, u * b_overlap(u, bump()));
  CHECK(sup < 10.0);  // 4 pi int Phi^2 ~ 6.81
  CHECK(sup > 1.0);
  CHECK_THROWS_AS(b_overlap(-1.0, bump()), std::domain_error);
}

TEST_CASE("fit_c0: slope bound, audit, grid stability") {
  const double c0 = cached_c0();
  // slope match at zero: c0 <= -b'(0)
  const double db0 = (1.0 - b_overlap(1e-4, bump())) / 1e-4;
  CHECK(c0 <= db0 + 1e-6);
  CHECK(c0 > 0.05);
  // audit oracle on sample points
  for (double u : {0.01, 0.4, 3.0, 47.0, 900.0, 9000.0})
    CHECK(b_overlap(u, bump()) * (1.0 + c0 * u) <= 1.0 + 1e-10);
  // a coarse independent grid reproduces c0 within 1%
  double cmin = 1.0 / (4.0 * M_PI * bump().phi_sq_integral());
  for (double u = 0.025; u <= 4000.0; u *= 1.35) {
    const double h = (1.0 / b_overlap(u, bump()) - 1.0) / u;
    cmin = std::min(cmin, h);
  }
  CHECK(std::abs(cmin - c0) / c0 < 0.01);
}

TEST_CASE("B_eps series: exact first term and small-t convergence") {
  const ScalarParams p = params_at(0.0, 0.2);
  const double t = 0.5;
  const BepsSeriesResult r = b_eps_series(t, p, 1, 100, 7);
  const double expected =
      p.beta_eps * p.beta_eps /
      (4.0 * M_PI * std::sqrt(t * t + p.c0 * p.eps * p.eps * t));
  CHECK(r.term_means[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(r.term_stderrs[0] == 0.0);

  // in the regime t <= eps^2 c0 the terms decay from the start
  const double ts = 0.5 * p.c0 * p.eps * p.eps;
  const BepsSeriesResult s = b_eps_series(ts, p, 12, 4000, 11);
  for (std::size_t l = 1; l < s.term_means.size(); ++l)
    CHECK(s.term_means[l] < s.term_means[l - 1]);
  // and the total obeys the t^{-1/2} * t^{-1/2} |log t|^{-2} shape
  const double shape = std::pow(ts, -1.0) * std::pow(std::log(ts), -2.0);
  CHECK(s.estimate.mean / shape < 50.0);
}

TEST_CASE("B_eps: series vs contour at (0.5, 0.1)") {
  const ScalarParams p = params_at(0.0, 0.1);
  const BepsSeriesResult s = b_eps_series(0.5, p, 60, 20000, 3);
  const double series = s.estimate.mean + s.truncation_tail;
  const double contour = b_eps_contour(0.5, p);
  const double tol =
      3.0 * s.estimate.stderr_ + 0.02 * contour + s.truncation_tail * 0.5;
  CHECK(std::abs(series - contour) < tol);
}

TEST_CASE("B_eps contour: Laplace-transform consistency at lambda = 2 c1") {
  for (double eps : {0.2, 0.1}) {
    const ScalarParams p = params_at(0.0, eps);
    const double lam = 2.0 * p.c1;
    const double C = c_eps(lam, p, CepsMode::closed);
    const double rhs = p.beta_eps * C / (1.0 - C);
    auto f = [&](double t) { return std::exp(-lam * t) * b_eps_contour(t, p); };
    const QuadResult head = integrate_tanh_sinh(f, 0.0, 0.05, 1e-8);
    const QuadResult tail = integrate_gk(f, 0.05, 1.5, 1e-9);
    const double lt = head.value + tail.value;
    CHECK(std::abs(lt - rhs) / rhs < 1e-4);
  }
}

TEST_CASE("B_eps contour obeys the t^{-1} |log(t ^ 1/2)|^{-2} e^{Ct} shape") {
  const ScalarParams p = params_at(0.0, 0.05);
  auto shape = [](double t) {
    const double l = std::log(std::min(t, 0.5));
    return (1.0 / t) / (l * l);
  };
  // fit C on a coarse grid, then verify on a denser one with 25% slack
  double cfit = 0.0;
  for (double t = 0.01; t <= 1.0; t *= 2.0)
    cfit = std::max(cfit, b_eps_contour(t, p) / (shape(t) * std::exp(t)));
  for (double t = 0.012; t <= 1.0; t *= 1.5) {
    CHECK(b_eps_contour(t, p) <= 1.25 * cfit * shape(t) * std::exp(t));
  }
}

TEST_CASE("lambda_star lies in (0, c1) and pole error fires when eps too big") {
  const ScalarParams p = params_at(0.0, 0.1);
  const double ls = lambda_star(p);
  CHECK(ls > 0.0);
  CHECK(ls < p.c1);
  // C_eps(lambda*) = 1
  CHECK(c_eps(ls, p, CepsMode::closed) == doctest::Approx(1.0).epsilon(1e-9));
  // large theta pushes eta up and destroys C_eps(c1) < 1
  const ScalarParams bad = ScalarParams::make(8.0, 0.3, bump(), cached_c0());
  CHECK_THROWS_AS(lambda_star(bad), pole_error);
  CHECK_THROWS_AS(b_eps_contour(0.5, bad), pole_error);
}

TEST_CASE("c2 constant is finite and at least 1") {
  const ScalarParams p = params_at(0.0, 0.1);
  const double c2 = c2_constant(p);
  CHECK(c2 >= 1.0);
  CHECK(std::isfinite(c2));
}
