#pragma once

#include <cstdint>
#include <vector>

#include "dbose/mollifier.hpp"
#include "dbose/quadrature_mc.hpp"

namespace dbose {

inline constexpr double kEulerGamma = 0.57721566490153286060651209;

// log Gamma(u), u > 0.
double ln_gamma(double u);

struct JResult {
  double value;
  double rel_err;  // achieved tolerance estimate
};

// j(t) = int_0^inf t^{u-1} e^{theta u} / Gamma(u) du.
JResult volterra_j(double t, double theta);

// j(t) cached on a log-spaced grid, cubic interpolation in (log t, log j).
// Outside the cached window falls back to direct quadrature.
class JTable {
 public:
  JTable(double theta, double tmin, double tmax, int nodes = 400);
  double operator()(double t) const;
  double theta() const { return theta_; }
  // direct-quadrature evaluation (the audited reference path)
  double direct(double t) const { return volterra_j(t, theta_).value; }

 private:
  double theta_;
  double log_tmin_, log_tmax_, dlog_;
  std::vector<double> log_j_;
};

// D(lambda) = 2 int_0^inf e^{-s} log(sqrt(s) + sqrt(s + lambda)) ds, lambda >= 0.
double d_lambda(double lam);
// dD/dlambda for lambda > 0.
double d_lambda_deriv(double mu);

struct BoundaryValue {
  double re;
  double im;
};
// D(-x + i0) for x > 0, branch sqrt(s - x + i0) = i sqrt(x - s) for s < x.
BoundaryValue d_boundary(double x);

// Scalar parameters of the eps-level bounds.
struct ScalarParams {
  double theta = 0.0;
  double eps = 0.1;
  double beta_eps = 0.0;  // coupling
  double c0 = 0.0;        // overlap-decay constant
  double c1 = 0.0;        // e^{gamma + D(0) + 1}, from this module's D
  double eta_eps = 0.0;   // 2|log eps| - log c0 - 4 pi / beta_eps

  double q() const { return c0 * eps * eps; }

  static ScalarParams make(double theta, double eps, const MollifierHandle& h,
                           double c0_precomputed = 0.0);
};

enum class CepsMode { integral, closed };

// C_eps(lambda), Laplace transform of beta/(4 pi sqrt(s^2 + c0 eps^2 s)).
double c_eps(double lam, const ScalarParams& p, CepsMode mode);

// b(u) = int Phi(y) e^{-u|y-y'|^2/4} Phi(y') dy dy'.
double b_overlap(double u, const MollifierHandle& phi2);

// Largest c0 with b(u) <= (1 + c0 u)^{-1} on a dense grid (plus the exact
// large-u asymptote 1/(4 pi int Phi^2)); audited on a 10x denser grid.
double fit_c0(const MollifierHandle& phi2);

struct BepsSeriesResult {
  MCEstimate estimate;          // truncated series total
  double truncation_tail = 0.0; // geometric tail estimate beyond the last term
  std::vector<double> term_means;
  std::vector<double> term_stderrs;
};

// B_eps(t) as the series of simplex integrals, importance-sampled term by term.
BepsSeriesResult b_eps_series(double t, const ScalarParams& p, int lmax,
                              int nsamples, std::uint64_t seed);

// Root of log(lambda) = eta_eps + D(c0 eps^2 lambda) in (0, c1); this is the
// real pole of beta C_eps / (1 - C_eps). Throws pole_error if C_eps(c1) >= 1.
double lambda_star(const ScalarParams& p);

// B_eps(t) by the inverted Laplace transform: pole residue at lambda_star plus
// the branch-cut integral with F_eps, G_eps boundary values.
double b_eps_contour(double t, const ScalarParams& p);

// The constant shaping the contour-integral split points (runtime scan).
double c2_constant(const ScalarParams& p);

}  // namespace dbose
