#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace dbose {

struct QuadResult {
  double value = 0.0;
  double abs_err = 0.0;   // error estimate, not a guarantee
  std::size_t evals = 0;

  QuadResult& operator+=(const QuadResult& o) {
    value += o.value;
    abs_err += o.abs_err;
    evals += o.evals;
    return *this;
  }
};

using Integrand = std::function<double(double)>;

// Adaptive Gauss-Kronrod 7-15 on [a, b].
QuadResult integrate_gk(const Integrand& f, double a, double b,
                        double rel_tol = 1e-10, double abs_tol = 0.0,
                        int max_depth = 48);

// tanh-sinh (double exponential) rule on (a, b); handles endpoint singularities.
QuadResult integrate_tanh_sinh(const Integrand& f, double a, double b,
                               double rel_tol = 1e-11, int max_level = 12);

// [a, inf) via u/(1-u) map + adaptive GK. Integrand must decay.
QuadResult integrate_to_inf(const Integrand& f, double a,
                            double rel_tol = 1e-10);

// Gauss-Legendre nodes/weights on [-1, 1] (Newton on Legendre polynomials).
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

// Convenience: nodes/weights mapped to [a, b].
void gauss_legendre_ab(int n, double a, double b,
                       std::vector<double>& x, std::vector<double>& w);

}  // namespace dbose
