#pragma once

// Shared oracles for the unit and acceptance suites. These stay independent
// of the implementation paths they check.

#include <cmath>

#include "dbose/quadrature.hpp"
#include "dbose/specfun.hpp"

namespace dbose_test {

// Numerical Laplace transform int_0^T e^{-lam t} j(t) dt. The head behaves
// like 1/(t log^2 t), so plain quadrature converges only logarithmically;
// the exact map t = T e^{1 - 1/v} flattens it.
inline double j_laplace_numeric(double lam, double theta, double T) {
  auto integrand = [&](double v) {
    const double expo = 1.0 - 1.0 / v;
    if (expo < -60.0) {
      // j(t) t ~ (1 + 2(g+th)/L + 6 c2 / L^2) / L^2, L = -log t
      const double L = 1.0 / v - 1.0 + std::log(1.0 / T);
      const double g = dbose::kEulerGamma;
      const double c2 =
          g * g / 2.0 - M_PI * M_PI / 12.0 + g * theta + 0.5 * theta * theta;
      return (1.0 + 2.0 * (g + theta) / L + 6.0 * c2 / (L * L)) / (v * v * L * L);
    }
    const double t = T * std::exp(expo);
    return std::exp(-lam * t) * dbose::volterra_j(t, theta).value * t / (v * v);
  };
  return dbose::integrate_gk(integrand, 0.0, 1.0, 1e-9).value;
}

}  // namespace dbose_test
