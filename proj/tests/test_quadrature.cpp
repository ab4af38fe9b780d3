#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dbose/quadrature.hpp"

using namespace dbose;

TEST_CASE("gk handles smooth integrands") {
  const QuadResult r = integrate_gk([](double x) { return std::sin(x); }, 0.0, M_PI);
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("tanh-sinh handles endpoint singularities") {
  // int_0^1 x^{-1/2} dx = 2
  const QuadResult r =
      integrate_tanh_sinh([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0);
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-10));
  // int_0^1 log(x) dx = -1
  const QuadResult r2 =
      integrate_tanh_sinh([](double x) { return std::log(x); }, 0.0, 1.0);
  CHECK(r2.value == doctest::Approx(-1.0).epsilon(1e-10));
}

TEST_CASE("semi-infinite map") {
  const QuadResult r =
      integrate_to_inf([](double x) { return std::exp(-x); }, 0.0);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-10));
  const QuadResult r2 =
      integrate_to_inf([](double x) { return 1.0 / (x * x); }, 1.0);
  CHECK(r2.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("gauss-legendre integrates polynomials of degree 2n-1") {
  std::vector<double> x, w;
  gauss_legendre_ab(6, 0.0, 1.0, x, w);
  double acc = 0.0;
  for (int i = 0; i < 6; ++i) acc += w[i] * std::pow(x[i], 11.0);
  CHECK(acc == doctest::Approx(1.0 / 12.0).epsilon(1e-13));
  double mass = 0.0;
  for (int i = 0; i < 6; ++i) mass += w[i];
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("gk reports an error estimate") {
  const QuadResult r = integrate_gk(
      [](double x) { return std::exp(-x * x); }, -8.0, 8.0, 1e-12);
  CHECK(r.value == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-11));
  CHECK(r.abs_err < 1e-8);
  CHECK(r.evals > 15);
}
