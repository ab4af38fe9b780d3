#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dbose/mollifier.hpp"
#include "dbose/rng.hpp"
#include "dbose/spaces.hpp"

namespace dbose {

// Point of Sigma(t): nonnegative taus summing to t.
struct SimplexPoint {
  std::vector<double> taus;
  double t = 0.0;
};

struct MCEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::int64_t nsamples = 0;
  std::uint64_t seed = 0;
};

enum class SimplexProfile { uniform, halfpow };

struct SimplexSample {
  SimplexPoint point;
  double weight = 1.0;  // importance weight (1 / density)
};

// uniform: Dirichlet(1,..,1) scaled by t; halfpow: Dirichlet(1/2,..,1/2),
// matched to integrands with prod tau^{-1/2} endpoint behavior.
SimplexSample simplex_sample(int l, double t, SimplexProfile profile,
                             CounterRng& rng);

// int_{Sigma(t)} prod tau_k^{-1/2} = t^{l/2-1} Gamma(1/2)^l / Gamma(l/2)
double dirichlet_closed_form(int l, double t);

MCEstimate simplex_integrate(
    const std::function<double(const SimplexPoint&)>& f, int l, double t,
    SimplexProfile profile, int nsamples, std::uint64_t seed);

// n planar Brownian paths on a uniform time grid.
struct PathBundle {
  double t = 0.0;
  double dt = 0.0;
  XPoint start;
  // paths[particle][step], step 0..nsteps inclusive
  std::vector<std::vector<Vec2>> paths;

  int nsteps() const {
    return paths.empty() ? 0 : static_cast<int>(paths[0].size()) - 1;
  }
};

PathBundle brownian_sample(const XPoint& x, double t, double dt,
                           CounterRng& rng);

struct FeynmanKacResult {
  MCEstimate estimate;
  std::int64_t clamped = 0;  // samples whose exponent hit the overflow clamp
  bool valid = true;         // false if clamped fraction exceeds 0.1%
};

// E_x[ exp(beta int_0^t sum_alpha Phi^eps(B_i - B_j) ds) f(B_t) ],
// trapezoid rule on the path grid. beta defaults to beta_eps(eps, theta, h).
FeynmanKacResult feynman_kac_estimate(
    const std::function<double(const XPoint&)>& f, const XPoint& x, double t,
    double eps, double dt, int nsamples, const MollifierHandle& h, double theta,
    std::uint64_t seed, std::optional<double> beta_override = std::nullopt);

}  // namespace dbose
