#include "dbose/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dbose/errors.hpp"
#include "dbose/parallel.hpp"

namespace dbose {

GridFunction heat_apply(const GridFunction& f, double t) {
  if (!(t > 0.0)) throw std::domain_error("heat_apply: t <= 0");
  GridFunction out = f;
  gauss_conv_all(out, t, true);
  return out;
}

namespace {

// ---- grid layout helpers ------------------------------------------------

Axis block_axis(const GridSpec& xgrid) {
  const Axis& a0 = xgrid.axes[0];
  for (const auto& a : xgrid.axes)
    if (a.count != a0.count || std::abs(a.lo - a0.lo) > 1e-12 ||
        std::abs(a.step - a0.step) > 1e-12)
      throw std::invalid_argument("chain grids require identical x-blocks");
  return a0;
}

std::vector<int> spectators(const PairIdx& alpha, int n) {
  std::vector<int> s;
  for (int k = 1; k <= n; ++k)
    if (!alpha.contains(k)) s.push_back(k);
  return s;
}

GridSpec y_spec(const PairIdx& alpha, const SemigroupContext& ctx) {
  const Axis ax = block_axis(ctx.xgrid);
  GridSpec g;
  const int nspect = ctx.n - 2;
  g.axes.assign(2 + 2 * nspect, ax);
  (void)alpha;
  return g;
}

GridSpec yeps_spec(const PairIdx& alpha, const SemigroupContext& ctx) {
  const Axis ax = block_axis(ctx.xgrid);
  GridSpec g;
  g.axes = {ctx.raxis, ctx.raxis};
  for (int k = 0; k < 2 + 2 * (ctx.n - 2); ++k) g.axes.push_back(ax);
  (void)alpha;
  return g;
}

// map a multi-index on Y(alpha) to the X-grid linear index with x_i=x_j=yc
struct DiagonalSlicer {
  std::vector<std::size_t> xs;  // strides on X
  int n;
  PairIdx alpha;
  std::vector<int> spect;

  std::size_t x_linear(int c1, int c2, const std::vector<int>& sidx) const {
    std::size_t lin = 0;
    int sp = 0;
    for (int k = 1; k <= n; ++k) {
      int i1, i2;
      if (alpha.contains(k)) {
        i1 = c1;
        i2 = c2;
      } else {
        i1 = sidx[2 * sp];
        i2 = sidx[2 * sp + 1];
        ++sp;
      }
      lin += xs[2 * (k - 1)] * i1 + xs[2 * (k - 1) + 1] * i2;
    }
    return lin;
  }
};

// ---- factor applications (limiting family) ------------------------------

// g_alpha(t): X -> Y(alpha); heat then diagonal restriction
GridFunction apply_incoming(const GridFunction& f, const PairIdx& alpha,
                            double t, const SemigroupContext& ctx) {
  const GridFunction hf = heat_apply(f, t);
  GridFunction out(y_spec(alpha, ctx));
  DiagonalSlicer sl{hf.spec.strides(), ctx.n, alpha, spectators(alpha, ctx.n)};
  const int m = out.spec.axes[0].count;
  const int nspect = ctx.n - 2;
  std::vector<int> sidx(2 * nspect, 0);
  const auto ostr = out.spec.strides();
  // iterate (c1, c2, sidx...)
  std::vector<int> idx(out.spec.axes.size(), 0);
  for (std::size_t lin = 0; lin < out.v.size(); ++lin) {
    for (int d = 0; d < 2 * nspect; ++d) sidx[d] = idx[2 + d];
    out.v[lin] = hf.v[sl.x_linear(idx[0], idx[1], sidx)];
    for (int d = static_cast<int>(idx.size()) - 1; d >= 0; --d) {
      if (++idx[d] < out.spec.axes[d].count) break;
      idx[d] = 0;
    }
  }
  (void)m;
  return out;
}

// J_alpha(t): Y -> Y
void apply_jop(GridFunction& v, double t, const SemigroupContext& ctx) {
  const double scale = 4.0 * M_PI * ctx.j_of(t);
  gauss_conv_axis(v, 0, 0.5 * t, true);
  gauss_conv_axis(v, 1, 0.5 * t, true);
  for (std::size_t d = 2; d < v.spec.axes.size(); ++d)
    gauss_conv_axis(v, static_cast<int>(d), t, true);
  for (double& x : v.v) x *= scale;
}

// stage helpers for the spread g*_alpha: one scalar-axis pair
// T[c, a, b] = sum_{c'} w g1(a - sa - c') g1(b + sb - c') V[c, c']  (per slice)
void spread_pair_axis(const std::vector<double>& in, int mc, int mout,
                      const Axis& cax, const Axis& oax, double t, double sa,
                      double sb, std::vector<double>& out) {
  // in: [mc x mc] over (c_keep, c_this); out: [mc x mout x mout] (c_keep, a, b)
  out.assign(static_cast<std::size_t>(mc) * mout * mout, 0.0);
  std::vector<double> ga(mout * mc), gb(mout * mc);
  for (int a = 0; a < mout; ++a)
    for (int c = 0; c < mc; ++c) {
      const double w = cax.weight(c);
      ga[a * mc + c] = gauss1d(t, oax.node(a) - sa - cax.node(c)) * w;
      gb[a * mc + c] = gauss1d(t, oax.node(a) + sb - cax.node(c));
    }
  for (int k = 0; k < mc; ++k) {
    const double* row = &in[static_cast<std::size_t>(k) * mc];
    for (int a = 0; a < mout; ++a) {
      const double* gar = &ga[a * mc];
      double* orow = &out[(static_cast<std::size_t>(k) * mout + a) * mout];
      for (int b = 0; b < mout; ++b) {
        const double* gbr = &gb[b * mc];
        double acc = 0.0;
        for (int c = 0; c < mc; ++c) acc += gar[c] * gbr[c] * row[c];
        orow[b] += acc;
      }
    }
  }
}

// g*_alpha(t): Y(alpha) -> X (shift = eps*yr/2 for the eps variant, else 0)
void spread_adjoint_accumulate(const GridFunction& v_in, const PairIdx& alpha,
                               double t, double s1, double s2, double coef,
                               const SemigroupContext& ctx, GridFunction& out) {
  // v_in on Y(alpha) layout (yc1, yc2, spect...)
  GridFunction v = v_in;
  for (std::size_t d = 2; d < v.spec.axes.size(); ++d)
    gauss_conv_axis(v, static_cast<int>(d), t, true);
  const Axis cax = v.spec.axes[0];
  const Axis oax = out.spec.axes[0];
  const int mc = cax.count;
  const int mo = oax.count;
  const int nspect = ctx.n - 2;
  const auto vstr = v.spec.strides();
  const auto ostr = out.spec.strides();
  const auto spect = spectators(alpha, ctx.n);

  // iterate spectator slices
  std::vector<int> sidx(std::max(1, 2 * nspect), 0);
  std::size_t nslices = 1;
  for (int d = 0; d < 2 * nspect; ++d) nslices *= v.spec.axes[2 + d].count;

  std::vector<double> slice(static_cast<std::size_t>(mc) * mc);
  std::vector<double> t1, t2;
  for (std::size_t sl = 0; sl < nslices; ++sl) {
    // decode spectator index
    {
      std::size_t rem = sl;
      for (int d = 2 * nspect - 1; d >= 0; --d) {
        sidx[d] = static_cast<int>(rem % v.spec.axes[2 + d].count);
        rem /= v.spec.axes[2 + d].count;
      }
    }
    std::size_t base = 0;
    for (int d = 0; d < 2 * nspect; ++d) base += vstr[2 + d] * sidx[d];
    for (int c1 = 0; c1 < mc; ++c1)
      for (int c2 = 0; c2 < mc; ++c2)
        slice[static_cast<std::size_t>(c1) * mc + c2] =
            v.v[base + vstr[0] * c1 + vstr[1] * c2];

    // axis 2 of the blocks: T[c1, a2, b2]
    spread_pair_axis(slice, mc, mo, cax, oax, t, s2, s2, t1);
    // axis 1: W[a1, b1, a2, b2] = sum_{c1} w g1(a1-s1-c1) g1(b1+s1-c1) T[c1,a2,b2]
    t2.assign(static_cast<std::size_t>(mo) * mo * mo * mo, 0.0);
    {
      std::vector<double> ga(mo * mc), gb(mo * mc);
      for (int a = 0; a < mo; ++a)
        for (int c = 0; c < mc; ++c) {
          ga[a * mc + c] =
              gauss1d(t, oax.node(a) - s1 - cax.node(c)) * cax.weight(c);
          gb[a * mc + c] = gauss1d(t, oax.node(a) + s1 - cax.node(c));
        }
      for (int a1 = 0; a1 < mo; ++a1)
        for (int b1 = 0; b1 < mo; ++b1) {
          double* dst =
              &t2[(static_cast<std::size_t>(a1) * mo + b1) * mo * mo];
          for (int c1 = 0; c1 < mc; ++c1) {
            const double g = ga[a1 * mc + c1] * gb[b1 * mc + c1];
            if (g == 0.0) continue;
            const double* src = &t1[static_cast<std::size_t>(c1) * mo * mo];
            for (int ab = 0; ab < mo * mo; ++ab) dst[ab] += g * src[ab];
          }
        }
    }
    // scatter into out at (i-block = a, j-block = b, spectators = sidx)
    std::size_t obase = 0;
    {
      int sp = 0;
      for (int k = 1; k <= ctx.n; ++k) {
        if (alpha.contains(k)) continue;
        obase += ostr[2 * (k - 1)] * sidx[2 * sp] +
                 ostr[2 * (k - 1) + 1] * sidx[2 * sp + 1];
        ++sp;
      }
    }
    const int bi = 2 * (alpha.i - 1), bj = 2 * (alpha.j - 1);
    for (int a1 = 0; a1 < mo; ++a1)
      for (int b1 = 0; b1 < mo; ++b1)
        for (int a2 = 0; a2 < mo; ++a2)
          for (int b2 = 0; b2 < mo; ++b2) {
            const std::size_t oi = obase + ostr[bi] * a1 + ostr[bi + 1] * a2 +
                                   ostr[bj] * b1 + ostr[bj + 1] * b2;
            out.v[oi] += coef * t2[((static_cast<std::size_t>(a1) * mo + b1) *
                                        mo +
                                    a2) *
                                       mo +
                                   b2];
          }
  }
}

// swapping g_{alpha alpha'}(t): Y(alpha') -> Y(alpha), |alpha ^ alpha'| share 1
GridFunction apply_swapping(const GridFunction& v, const PairIdx& alpha,
                            const PairIdx& alpha_prime, double t,
                            const SemigroupContext& ctx) {
  if (ctx.n != 3)
    throw std::invalid_argument("limiting swapping implemented for n = 3");
  // shared particle p, alpha = {p, q}, alpha' = {p, r}; out spectator r, in q
  const Axis ax = v.spec.axes[0];
  const int m = ax.count;
  // A(c', w) = conv of v over its spectator block, then evaluated at w = c_out
  GridFunction A = v;
  gauss_conv_axis(A, 2, t, true);
  gauss_conv_axis(A, 3, t, true);
  GridFunction out(y_spec(alpha, ctx));
  const auto astr = A.spec.strides();
  const auto ostr = out.spec.strides();
  // out(c, u) = sum_{c'} w g(t, c - c') g(t, u - c') A(c', c)
  // per out c-node: 2-d separable contraction over c'
  std::vector<double> g1v(m * m);
  for (int a = 0; a < m; ++a)
    for (int c = 0; c < m; ++c) g1v[a * m + c] = gauss1d(t, ax.node(a) - ax.node(c));
  std::vector<double> D(m * m), T(static_cast<std::size_t>(m) * m);
  for (int c1 = 0; c1 < m; ++c1)
    for (int c2 = 0; c2 < m; ++c2) {
      // D(c1', c2') = g(c - c') * A(c', c)  with c = (c1, c2)
      for (int p1 = 0; p1 < m; ++p1)
        for (int p2 = 0; p2 < m; ++p2) {
          const double g = g1v[c1 * m + p1] * g1v[c2 * m + p2] *
                           ax.weight(p1) * ax.weight(p2);
          D[p1 * m + p2] =
              g * A.v[astr[0] * p1 + astr[1] * p2 + astr[2] * c1 + astr[3] * c2];
        }
      // T(u1, u2) = sum_{p} g(u - p) D(p)  separable
      // stage 1 over p2
      std::vector<double> S(static_cast<std::size_t>(m) * m, 0.0);
      for (int p1 = 0; p1 < m; ++p1)
        for (int u2 = 0; u2 < m; ++u2) {
          double acc = 0.0;
          for (int p2 = 0; p2 < m; ++p2) acc += g1v[u2 * m + p2] * D[p1 * m + p2];
          S[p1 * m + u2] = acc;
        }
      for (int u1 = 0; u1 < m; ++u1)
        for (int u2 = 0; u2 < m; ++u2) {
          double acc = 0.0;
          for (int p1 = 0; p1 < m; ++p1) acc += g1v[u1 * m + p1] * S[p1 * m + u2];
          out.v[ostr[0] * c1 + ostr[1] * c2 + ostr[2] * u1 + ostr[3] * u2] = acc;
        }
    }
  return out;
}

// ---- factor applications (eps family) -----------------------------------

// g^eps_alpha(t): X -> YEps(alpha)
GridFunction apply_eps_incoming(const GridFunction& f, const PairIdx& alpha,
                                double t, double eps,
                                const SemigroupContext& ctx) {
  const GridFunction hf = heat_apply(f, t);
  GridFunction out(yeps_spec(alpha, ctx));
  const MollifierHandle& h = *ctx.mollifier;
  const auto spect = spectators(alpha, ctx.n);
  std::vector<double> x(2 * ctx.n);
  std::size_t lin = 0;
  for_each_node(out.spec, [&](std::size_t, const std::vector<double>& c) {
    const double phi = h.eval(c[0], c[1], std::nullopt, true);
    if (phi == 0.0) {
      out.v[lin++] = 0.0;
      return;
    }
    int sp = 0;
    for (int k = 1; k <= ctx.n; ++k) {
      if (k == alpha.i) {
        x[2 * (k - 1)] = c[2] + 0.5 * eps * c[0];
        x[2 * (k - 1) + 1] = c[3] + 0.5 * eps * c[1];
      } else if (k == alpha.j) {
        x[2 * (k - 1)] = c[2] - 0.5 * eps * c[0];
        x[2 * (k - 1) + 1] = c[3] - 0.5 * eps * c[1];
      } else {
        x[2 * (k - 1)] = c[4 + 2 * sp];
        x[2 * (k - 1) + 1] = c[4 + 2 * sp + 1];
        ++sp;
      }
    }
    out.v[lin++] = phi * interp_cubic(hf, x);
  });
  return out;
}

// g^eps_{alpha alpha}(t): YEps -> YEps, separable in (yr) x (yc) x spectators
void apply_eps_self_swapping(GridFunction& v, double t, double eps,
                             const SemigroupContext& ctx) {
  const MollifierHandle& h = *ctx.mollifier;
  // multiply by phi(yr)
  std::size_t lin = 0;
  for_each_node(v.spec, [&](std::size_t, const std::vector<double>& c) {
    v.v[lin++] *= h.eval(c[0], c[1], std::nullopt, true);
  });
  gauss_conv_axis(v, 0, 2.0 * t / (eps * eps), true);
  gauss_conv_axis(v, 1, 2.0 * t / (eps * eps), true);
  for (double& x : v.v) x /= (eps * eps);
  lin = 0;
  for_each_node(v.spec, [&](std::size_t, const std::vector<double>& c) {
    v.v[lin++] *= h.eval(c[0], c[1], std::nullopt, true);
  });
  gauss_conv_axis(v, 2, 0.5 * t, true);
  gauss_conv_axis(v, 3, 0.5 * t, true);
  for (std::size_t d = 4; d < v.spec.axes.size(); ++d)
    gauss_conv_axis(v, static_cast<int>(d), t, true);
}

// g^eps_{alpha alpha'}(t), alpha != alpha': dense fallback (coarse grids only)
GridFunction apply_eps_cross_swapping(const GridFunction& v,
                                      const PairIdx& alpha,
                                      const PairIdx& alpha_prime, double t,
                                      double eps, const SemigroupContext& ctx) {
  GridFunction out(yeps_spec(alpha, ctx));
  KernelContext kctx;
  kctx.mollifier = ctx.mollifier;
  kctx.theta = ctx.theta;
  kctx.params = ctx.params;
  kctx.n = ctx.n;
  KernelDescriptor d;
  d.kind = KernelKind::heat_eps_swapping;
  d.alpha = alpha;
  d.alpha_prime = alpha_prime;
  d.t = t;
  d.eps = eps;
  const int nspect = ctx.n - 2;
  auto to_point = [&](const std::vector<double>& c) {
    YEpsPoint p;
    p.yr = {c[0], c[1]};
    p.yc = {c[2], c[3]};
    p.ys.resize(nspect);
    for (int s = 0; s < nspect; ++s) p.ys[s] = {c[4 + 2 * s], c[4 + 2 * s + 1]};
    return p;
  };
  std::vector<std::vector<double>> in_pts;
  std::vector<double> in_w;
  {
    const auto& axes = v.spec.axes;
    std::vector<int> idx(axes.size(), 0);
    for (std::size_t lin = 0; lin < v.v.size(); ++lin) {
      if (v.v[lin] != 0.0) {
        double w = 1.0;
        std::vector<double> c(axes.size());
        for (std::size_t dd = 0; dd < axes.size(); ++dd) {
          w *= axes[dd].weight(idx[dd]);
          c[dd] = axes[dd].node(idx[dd]);
        }
        in_pts.push_back(c);
        in_w.push_back(w * v.v[lin]);
      }
      for (int dd = static_cast<int>(axes.size()) - 1; dd >= 0; --dd) {
        if (++idx[dd] < axes[dd].count) break;
        idx[dd] = 0;
      }
    }
  }
  std::size_t lin = 0;
  for_each_node(out.spec, [&](std::size_t, const std::vector<double>& c) {
    const KPoint op = KPoint::of(to_point(c));
    double acc = 0.0;
    for (std::size_t k = 0; k < in_pts.size(); ++k) {
      const KPoint ip = KPoint::of(to_point(in_pts[k]));
      acc += in_w[k] * kernel_eval(d, op, ip, kctx);
    }
    out.v[lin++] = acc;
  });
  return out;
}

// g^eps*_alpha(t): YEps(alpha) -> X, accumulated with coefficient coef
void apply_eps_adjoint_accumulate(const GridFunction& v, const PairIdx& alpha,
                                  double t, double eps, double coef,
                                  const SemigroupContext& ctx,
                                  GridFunction& out) {
  const MollifierHandle& h = *ctx.mollifier;
  const Axis& rax = v.spec.axes[0];
  const auto vstr = v.spec.strides();
  // slice per yr node -> Y(alpha)-shaped function, then shifted spread
  GridSpec yspec = y_spec(alpha, ctx);
  GridFunction slice(yspec);
  for (int r1 = 0; r1 < rax.count; ++r1)
    for (int r2 = 0; r2 < rax.count; ++r2) {
      const double yr1 = rax.node(r1), yr2 = rax.node(r2);
      const double phi = h.eval(yr1, yr2, std::nullopt, true);
      if (phi == 0.0) continue;
      const double wq = rax.weight(r1) * rax.weight(r2) * phi;
      const std::size_t base = vstr[0] * r1 + vstr[1] * r2;
      for (std::size_t k = 0; k < slice.v.size(); ++k)
        slice.v[k] = v.v[base + k];  // contiguous tail block
      spread_adjoint_accumulate(slice, alpha, t, 0.5 * eps * yr1,
                                0.5 * eps * yr2, coef * wq, ctx, out);
    }
}

// ---- chain drivers -------------------------------------------------------

struct SlotPlan {
  // factor sequence applied right-to-left; times filled per sample
  // kinds: 0 = eps-incoming / incoming (rightmost), 1 = J (limiting),
  //        2 = swapping-self, 3 = swapping-cross, 4 = adjoint (leftmost)
  struct Factor {
    int kind;
    PairIdx alpha;
    PairIdx alpha2;  // cross swapping: source pair
    bool heavy;      // singular slot (J or swapping): matched importance map
  };
  std::vector<Factor> factors;  // rightmost first
  double coefficient = 1.0;
};

SlotPlan limiting_plan(const Diagram& dgm) {
  SlotPlan p;
  const int m = dgm.length();
  p.factors.push_back({0, dgm.seq[m - 1], {}, false});
  for (int k = m - 1; k >= 0; --k) {
    p.factors.push_back({1, dgm.seq[k], {}, true});
    if (k > 0) p.factors.push_back({3, dgm.seq[k - 1], dgm.seq[k], false});
  }
  p.factors.push_back({4, dgm.seq[0], {}, false});
  return p;
}

// eps: one bare-Duhamel composition (k_1,...,k_m) of the diagram
SlotPlan eps_plan(const Diagram& dgm, const std::vector<int>& comp,
                  double beta) {
  SlotPlan p;
  const int m = dgm.length();
  int total = 0;
  for (int k : comp) total += k;
  p.coefficient = std::pow(beta, total);
  p.factors.push_back({0, dgm.seq[m - 1], {}, false});
  for (int e = m - 1; e >= 0; --e) {
    for (int r = 0; r < comp[e] - 1; ++r)
      p.factors.push_back({2, dgm.seq[e], {}, true});
    if (e > 0) p.factors.push_back({3, dgm.seq[e - 1], dgm.seq[e], true});
  }
  p.factors.push_back({4, dgm.seq[0], {}, false});
  return p;
}

// exact log-profile sample on (0, R]: density tau^-1 (1 + log(R/tau))^-2
double sample_logweight(double R, CounterRng& rng, double& weight) {
  const double u = rng.uniform_pos();
  const double tau = R * std::exp(1.0 - 1.0 / u);
  const double l = 1.0 + std::log(R / std::max(tau, 1e-300));
  weight *= tau * l * l;
  return tau;
}

// sqrt-shifted profile on (0, R]: density ~ (tau^2 + q tau)^{-1/2}
double sample_sqrtshift(double R, double q, CounterRng& rng, double& weight) {
  const double Z =
      2.0 * std::log((std::sqrt(R) + std::sqrt(R + q)) / std::sqrt(q));
  const double y = std::sqrt(q) * std::exp(0.5 * rng.uniform() * Z);
  double tau = (y * y - q) * (y * y - q) / (4.0 * y * y);
  tau = std::min(tau, R);
  weight *= Z * std::sqrt(tau * tau + q * tau);
  return tau;
}

void sample_times(const SlotPlan& plan, double t, double q,
                  SimplexProfile edge_profile, CounterRng& rng,
                  std::vector<double>& taus, double& weight) {
  const int nf = static_cast<int>(plan.factors.size());
  taus.assign(nf, 0.0);
  weight = 1.0;
  double R = t;
  int nedges = 0;
  for (int k = 0; k < nf; ++k) {
    if (!plan.factors[k].heavy) {
      ++nedges;
      continue;
    }
    double tau;
    if (plan.factors[k].kind == 1)
      tau = sample_logweight(R, rng, weight);
    else
      tau = sample_sqrtshift(R, q, rng, weight);
    taus[k] = tau;
    R = std::max(R - tau, t * 1e-12);
  }
  // remaining edges: uniform Dirichlet on the remainder
  std::vector<double> e(nedges);
  double sum = 0.0;
  for (int k = 0; k < nedges; ++k) {
    e[k] = -std::log(rng.uniform_pos());
    sum += e[k];
  }
  int which = 0;
  for (int k = 0; k < nf; ++k)
    if (!plan.factors[k].heavy) taus[k] = R * e[which++] / sum;
  if (nedges > 1)
    weight *= std::exp((nedges - 1) * std::log(R) - std::lgamma(nedges));
}

GridFunction run_chain_once(const SlotPlan& plan, const std::vector<double>& taus,
                            const GridFunction& f, double eps, bool is_eps,
                            const SemigroupContext& ctx) {
  GridFunction out(ctx.xgrid);
  GridFunction state;
  const int nf = static_cast<int>(plan.factors.size());
  for (int k = 0; k < nf; ++k) {
    const auto& fac = plan.factors[k];
    const double tau = std::max(taus[k], 1e-14);
    switch (fac.kind) {
      case 0:
        state = is_eps ? apply_eps_incoming(f, fac.alpha, tau, eps, ctx)
                       : apply_incoming(f, fac.alpha, tau, ctx);
        break;
      case 1:
        apply_jop(state, tau, ctx);
        break;
      case 2:
        apply_eps_self_swapping(state, tau, eps, ctx);
        break;
      case 3:
        state = is_eps ? apply_eps_cross_swapping(state, fac.alpha, fac.alpha2,
                                                  tau, eps, ctx)
                       : apply_swapping(state, fac.alpha, fac.alpha2, tau, ctx);
        break;
      case 4:
        if (is_eps)
          apply_eps_adjoint_accumulate(state, fac.alpha, tau, eps, 1.0, ctx,
                                       out);
        else
          spread_adjoint_accumulate(state, fac.alpha, tau, 0.0, 0.0, 1.0, ctx,
                                    out);
        break;
    }
  }
  return out;
}

void enumerate_compositions(int m, int lmax, std::vector<int>& cur,
                            std::vector<std::vector<int>>& out, int used) {
  if (static_cast<int>(cur.size()) == m) {
    out.push_back(cur);
    return;
  }
  for (int k = 1; used + (k - 1) <= lmax; ++k) {
    cur.push_back(k);
    enumerate_compositions(m, lmax, cur, out, used + k - 1);
    cur.pop_back();
  }
}

}  // namespace

ChainResult chain_apply(const ChainSpec& spec, const GridFunction& f,
                        const SemigroupContext& ctx) {
  if (!spec.diagram.valid())
    throw std::invalid_argument("chain_apply: invalid diagram");
  if (!(spec.t > 0.0)) throw std::domain_error("chain_apply: t <= 0");
  const bool is_eps = spec.variant == ChainVariant::eps;

  std::vector<SlotPlan> plans;
  if (is_eps) {
    std::vector<std::vector<int>> comps;
    std::vector<int> cur;
    enumerate_compositions(spec.diagram.length(), spec.lmax, cur, comps, 0);
    for (const auto& c : comps)
      plans.push_back(eps_plan(spec.diagram, c, ctx.params.beta_eps));
  } else {
    plans.push_back(limiting_plan(spec.diagram));
  }

  ChainResult res;
  res.out = GridFunction(ctx.xgrid);
  double s1 = 0.0, s2 = 0.0;
  std::int64_t count = 0;
  const double q = ctx.params.c0 * spec.eps * spec.eps;
  for (std::size_t pl = 0; pl < plans.size(); ++pl) {
    const SlotPlan& plan = plans[pl];
    GridFunction acc(ctx.xgrid);
    const int ns = spec.sampling.nsamples;
    std::vector<double> taus;
    CounterRng rng(spec.sampling.seed, pl);
    for (int s = 0; s < ns; ++s) {
      double w = 1.0;
      sample_times(plan, spec.t, q, spec.sampling.profile, rng, taus, w);
      const GridFunction one =
          run_chain_once(plan, taus, f, spec.eps, is_eps, ctx);
      const double wc = w * plan.coefficient / ns;
      for (std::size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += wc * one.v[i];
      const double ival = one.integral() * w * plan.coefficient;
      s1 += ival;
      s2 += ival * ival;
      ++count;
    }
    for (std::size_t i = 0; i < res.out.v.size(); ++i)
      res.out.v[i] += acc.v[i];
  }
  res.meta.mean = s1 / count;
  const double var = std::max(0.0, s2 / count - res.meta.mean * res.meta.mean);
  res.meta.stderr_ = std::sqrt(var / count);
  res.meta.nsamples = count;
  res.meta.seed = spec.sampling.seed;
  return res;
}

GridFunction limiting_apply(const GridFunction& f, double t, int mmax,
                            const ChainSampling& sampling,
                            const SemigroupContext& ctx,
                            SeriesDiagnostics* diag) {
  if (ctx.n < 2 || ctx.n > 3)
    throw std::domain_error("limiting_apply: n must be 2 or 3");
  GridFunction out = heat_apply(f, t);
  const auto diagrams = enumerate_diagrams(ctx.n, mmax);
  double last_norm = 0.0;
  std::uint64_t stream = 0;
  for (const auto& d : diagrams) {
    ChainSpec cs;
    cs.diagram = d;
    cs.t = t;
    cs.variant = ChainVariant::limiting;
    cs.sampling = sampling;
    cs.sampling.seed = sampling.seed + 1000003 * (stream++);
    const ChainResult r = chain_apply(cs, f, ctx);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += r.out.v[i];
    if (d.length() == mmax) {
      double n2 = 0.0;
      for (double v : r.out.v) n2 += v * v;
      last_norm += std::sqrt(n2);
    }
  }
  if (diag) {
    diag->last_term_norm = last_norm;
    const double lam = ctx.params.c0 + 2.5;
    diag->lemma_tail =
        tail_bound_sum(mmax, t, lam, ctx.params.c0, ctx.params.c1, 10.0);
    diag->lemma_tail_valid = std::isfinite(diag->lemma_tail);
  }
  return out;
}

GridFunction duhamel_apply(const GridFunction& f, double t, double eps,
                           int mmax, int lmax, const ChainSampling& sampling,
                           const SemigroupContext& ctx,
                           SeriesDiagnostics* diag) {
  if (ctx.n < 2 || ctx.n > 3)
    throw std::domain_error("duhamel_apply: n must be 2 or 3");
  GridFunction out = heat_apply(f, t);
  const auto diagrams = enumerate_diagrams(ctx.n, mmax);
  double last_norm = 0.0;
  std::uint64_t stream = 0;
  for (const auto& d : diagrams) {
    ChainSpec cs;
    cs.diagram = d;
    cs.t = t;
    cs.variant = ChainVariant::eps;
    cs.eps = eps;
    cs.lmax = lmax;
    cs.sampling = sampling;
    cs.sampling.seed = sampling.seed + 1000003 * (stream++);
    const ChainResult r = chain_apply(cs, f, ctx);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += r.out.v[i];
    if (d.length() == mmax) {
      double n2 = 0.0;
      for (double v : r.out.v) n2 += v * v;
      last_norm += std::sqrt(n2);
    }
  }
  if (diag) {
    diag->last_term_norm = last_norm;
    const double lam = ctx.params.c0 + 2.5;
    diag->lemma_tail =
        tail_bound_sum(mmax, t, lam, ctx.params.c0, ctx.params.c1, 10.0);
    diag->lemma_tail_valid = std::isfinite(diag->lemma_tail);
  }
  return out;
}

double tail_bound(int m, double t, double lambda, double c0, double c1,
                  double c_universal) {
  if (m < 1) throw std::domain_error("tail_bound: m < 1");
  if (!(lambda >= c0 + 2.0))
    throw std::domain_error("tail_bound: lambda < c0 + 2");
  const double logarg = std::log(lambda - c0 - 1.0);
  const double inner = (m == 1) ? 1.0
                                : std::pow(c1 + c0 * c0 / logarg,
                                           static_cast<double>(m - 1));
  return std::pow(c_universal, m) * std::pow(static_cast<double>(m), 3) *
         std::exp(lambda * t) *
         (std::pow(c1, static_cast<double>(m)) + c0 * c0 * inner);
}

double tail_bound_sum(int mmax, double t, double lambda, double c0, double c1,
                      double c_universal) {
  double sum = 0.0;
  double prev = 0.0;
  for (int m = mmax + 1; m <= mmax + 400; ++m) {
    const double b = tail_bound(m, t, lambda, c0, c1, c_universal);
    if (m > mmax + 2 && b >= prev)
      return std::numeric_limits<double>::infinity();  // not summable
    sum += b;
    if (b < 1e-14 * sum) break;
    prev = b;
  }
  return sum;
}

}  // namespace dbose
