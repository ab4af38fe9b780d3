#pragma once

#include <cstdint>
#include <optional>

#include "dbose/kernels.hpp"
#include "dbose/quadrature_mc.hpp"

namespace dbose {

enum class ChainVariant { limiting, eps };

struct ChainSampling {
  int nsamples = 128;
  SimplexProfile profile = SimplexProfile::halfpow;  // edge slots
  std::uint64_t seed = 1;
};

struct ChainSpec {
  Diagram diagram;
  double t = 0.5;
  ChainVariant variant = ChainVariant::limiting;
  double eps = 0.0;  // eps variant only
  int mmax = 1;
  int lmax = 2;      // cap on inner collision factors per episode (eps)
  ChainSampling sampling;
};

struct SemigroupContext {
  const MollifierHandle* mollifier = nullptr;
  const JTable* jtable = nullptr;
  double theta = 0.0;
  ScalarParams params;  // for eps chains
  int n = 2;
  GridSpec xgrid;       // 2n axes; y_c / spectators reuse its per-block axes
  Axis raxis;           // y_r axis (per component) on supp phi

  double j_of(double t) const {
    return jtable ? (*jtable)(t) : volterra_j(t, theta).value;
  }
};

// Heat semigroup on the X grid: separable Gaussian convolution per axis.
GridFunction heat_apply(const GridFunction& f, double t);

struct ChainResult {
  GridFunction out;      // on the X grid
  MCEstimate meta;       // MC statistics of the grid integral of the output
};

// Monte Carlo over Sigma(t) of one diagram's kernel chain applied to f.
ChainResult chain_apply(const ChainSpec& spec, const GridFunction& f,
                        const SemigroupContext& ctx);

struct SeriesDiagnostics {
  double last_term_norm = 0.0;   // grid-L2 of the longest diagrams' total
  double lemma_tail = 0.0;       // Lemma-style advisory tail for m > mmax
  bool lemma_tail_valid = false;
};

// S(t) f = G(t) f + sum over diagrams of length <= mmax.
GridFunction limiting_apply(const GridFunction& f, double t, int mmax,
                            const ChainSampling& sampling,
                            const SemigroupContext& ctx,
                            SeriesDiagnostics* diag = nullptr);

// S^eps(t) f by the Duhamel/diagram series truncated at (mmax, lmax).
GridFunction duhamel_apply(const GridFunction& f, double t, double eps,
                           int mmax, int lmax, const ChainSampling& sampling,
                           const SemigroupContext& ctx,
                           SeriesDiagnostics* diag = nullptr);

// Right-hand side of the composition tail bound, evaluated verbatim:
// c^m m^3 e^{lambda t} (c1^m + c0^2 (c1 + c0^2/log(lambda-c0-1))^{m-1}).
double tail_bound(int m, double t, double lambda, double c0, double c1,
                  double c_universal);

// Sum of tail_bound over m > mmax; requires a geometric decay check.
double tail_bound_sum(int mmax, double t, double lambda, double c0, double c1,
                      double c_universal);

}  // namespace dbose
