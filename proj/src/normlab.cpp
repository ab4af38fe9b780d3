#include "dbose/normlab.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dbose/errors.hpp"
#include "dbose/quadrature.hpp"
#include "dbose/rng.hpp"

namespace dbose {

namespace {

std::pair<SpaceKind, SpaceKind> kind_spaces(KernelKind k) {
  switch (k) {
    case KernelKind::heat:
      return {SpaceKind::X, SpaceKind::X};
    case KernelKind::incoming:
      return {SpaceKind::Y, SpaceKind::X};
    case KernelKind::incoming_adj:
      return {SpaceKind::X, SpaceKind::Y};
    case KernelKind::swapping:
    case KernelKind::jop:
      return {SpaceKind::Y, SpaceKind::Y};
    case KernelKind::heat_eps_incoming:
      return {SpaceKind::YEps, SpaceKind::X};
    case KernelKind::heat_eps_incoming_adj:
      return {SpaceKind::X, SpaceKind::YEps};
    case KernelKind::heat_eps_swapping:
    case KernelKind::jop_eps:
      return {SpaceKind::YEps, SpaceKind::YEps};
  }
  return {SpaceKind::X, SpaceKind::X};
}

KPoint point_from_coords(SpaceKind kind, const std::vector<double>& c, int n) {
  switch (kind) {
    case SpaceKind::X: {
      XPoint x(n);
      for (int k = 0; k < n; ++k) x[k] = {c[2 * k], c[2 * k + 1]};
      return KPoint::of(std::move(x));
    }
    case SpaceKind::Y: {
      YPoint y;
      y.yc = {c[0], c[1]};
      for (int s = 0; s < n - 2; ++s)
        y.ys.push_back({c[2 + 2 * s], c[2 + 2 * s + 1]});
      return KPoint::of(std::move(y));
    }
    case SpaceKind::YEps: {
      YEpsPoint y;
      y.yr = {c[0], c[1]};
      y.yc = {c[2], c[3]};
      for (int s = 0; s < n - 2; ++s)
        y.ys.push_back({c[4 + 2 * s], c[4 + 2 * s + 1]});
      return KPoint::of(std::move(y));
    }
  }
  throw std::logic_error("point_from_coords");
}

std::vector<double> grid_weights(const GridSpec& g) {
  std::vector<double> w(g.size());
  std::vector<int> idx(g.axes.size(), 0);
  for (std::size_t lin = 0; lin < w.size(); ++lin) {
    double p = 1.0;
    for (std::size_t d = 0; d < g.axes.size(); ++d)
      p *= g.axes[d].weight(idx[d]);
    w[lin] = p;
    for (int d = static_cast<int>(g.axes.size()) - 1; d >= 0; --d) {
      if (++idx[d] < g.axes[d].count) break;
      idx[d] = 0;
    }
  }
  return w;
}

std::vector<double> grid_exponents(const GridSpec& g,
                                   const WeightedNormSpec& spec) {
  std::vector<double> w(g.size());
  std::size_t lin = 0;
  for_each_node(g, [&](std::size_t, const std::vector<double>& c) {
    w[lin++] = spec.exponent(c);
  });
  return w;
}

}  // namespace

std::vector<double> DiscretizedOperator::apply(
    const std::vector<double>& v) const {
  const auto w = grid_weights(in_grid);
  std::vector<double> out(rows(), 0.0);
  for (std::size_t o = 0; o < rows(); ++o) {
    const double* row = &kernel[o * cols()];
    double acc = 0.0;
    for (std::size_t i = 0; i < cols(); ++i) acc += row[i] * w[i] * v[i];
    out[o] = acc;
  }
  return out;
}

DiscretizedOperator discretize(const KernelDescriptor& d,
                               const GridSpec& out_grid,
                               const GridSpec& in_grid,
                               const KernelContext& ctx,
                               const WeightedNormSpec& out_spec,
                               const WeightedNormSpec& in_spec) {
  d.validate(ctx.n);
  const auto [out_kind, in_kind] = kind_spaces(d.kind);
  auto check_resolution = [&](const GridSpec& g, SpaceKind kind) {
    const std::size_t skip = (kind == SpaceKind::YEps) ? 2 : 0;
    for (std::size_t ax = skip; ax < g.axes.size(); ++ax)
      if (g.axes[ax].step > std::sqrt(d.t) / 4.0 + 1e-12)
        throw resolution_error("discretize: grid step > sqrt(t)/4");
  };
  check_resolution(out_grid, out_kind);
  check_resolution(in_grid, in_kind);

  DiscretizedOperator op;
  op.descriptor = d;
  op.out_grid = out_grid;
  op.in_grid = in_grid;
  op.out_spec = out_spec;
  op.in_spec = in_spec;
  op.kernel.resize(out_grid.size() * in_grid.size());

  std::vector<KPoint> outs, ins;
  outs.reserve(out_grid.size());
  ins.reserve(in_grid.size());
  for_each_node(out_grid, [&](std::size_t, const std::vector<double>& c) {
    outs.push_back(point_from_coords(out_kind, c, ctx.n));
  });
  for_each_node(in_grid, [&](std::size_t, const std::vector<double>& c) {
    ins.push_back(point_from_coords(in_kind, c, ctx.n));
  });
  for (std::size_t o = 0; o < outs.size(); ++o)
    for (std::size_t i = 0; i < ins.size(); ++i)
      op.kernel[o * ins.size() + i] = kernel_eval(d, outs[o], ins[i], ctx);
  return op;
}

DiscretizedOperator weight_conjugate(const DiscretizedOperator& T,
                                     const WeightedNormSpec& spec_in,
                                     const WeightedNormSpec& spec_out) {
  DiscretizedOperator out = T;
  const auto wo = grid_exponents(T.out_grid, spec_out);
  const auto wi = grid_exponents(T.in_grid, spec_in);
  for (std::size_t o = 0; o < T.rows(); ++o)
    for (std::size_t i = 0; i < T.cols(); ++i)
      out.kernel[o * T.cols() + i] *= std::exp(wo[o] - wi[i]);
  out.out_spec.a = 0.0;
  out.in_spec.a = 0.0;
  return out;
}

double opnorm_estimate(const DiscretizedOperator& T, int iters) {
  const auto nu_out = grid_weights(T.out_grid);
  const auto nu_in = grid_weights(T.in_grid);
  const auto eo = grid_exponents(T.out_grid, T.out_spec);
  const auto ei = grid_exponents(T.in_grid, T.in_spec);
  const std::size_t R = T.rows(), C = T.cols();
  // S[o,i] = sqrt(nu_o) e^{w_o} K[o,i] sqrt(nu_i) e^{-w_i}
  std::vector<double> S(R * C);
  for (std::size_t o = 0; o < R; ++o)
    for (std::size_t i = 0; i < C; ++i)
      S[o * C + i] = std::sqrt(nu_out[o]) * std::exp(eo[o]) *
                     T.kernel[o * C + i] * std::sqrt(nu_in[i]) *
                     std::exp(-ei[i]);
  std::vector<double> v(C), u(R), z(C);
  CounterRng rng(13579u, 1u);
  for (auto& x : v) x = rng.normal();
  double sigma = 0.0, prev = 0.0;
  for (int it = 0; it < iters; ++it) {
    std::fill(u.begin(), u.end(), 0.0);
    for (std::size_t o = 0; o < R; ++o) {
      const double* row = &S[o * C];
      double acc = 0.0;
      for (std::size_t i = 0; i < C; ++i) acc += row[i] * v[i];
      u[o] = acc;
    }
    std::fill(z.begin(), z.end(), 0.0);
    for (std::size_t o = 0; o < R; ++o) {
      const double* row = &S[o * C];
      const double uo = u[o];
      for (std::size_t i = 0; i < C; ++i) z[i] += row[i] * uo;
    }
    double nv = 0.0, nz = 0.0;
    for (std::size_t i = 0; i < C; ++i) {
      nv += v[i] * v[i];
      nz += z[i] * z[i];
    }
    prev = sigma;
    sigma = std::pow(nz / nv, 0.25);
    nz = std::sqrt(nz);
    for (std::size_t i = 0; i < C; ++i) v[i] = z[i] / nz;
  }
  (void)prev;
  return sigma;
}

// ------------------- matrix-free n = 2 eps operator norms -----------------

namespace {

struct EpsOpWork {
  // rotated X grid (d1, d2, x1, x2) and YEps grid (yr flattened, yc1, yc2)
  Axis dax, xax;
  int mr = 11;
  std::vector<double> yr1, yr2, wr, phi;
  double rstep = 0.0;

  EpsOpWork(const VerifyGrids& g, const MollifierHandle& h, int mr_) {
    dax = g.dax;
    xax = g.xax;
    mr = mr_;
    const double R = h.support_radius();
    rstep = 2.0 * R / (mr - 1);
    const int nr = mr * mr;
    yr1.resize(nr);
    yr2.resize(nr);
    wr.resize(nr);
    phi.resize(nr);
    for (int a = 0; a < mr; ++a)
      for (int b = 0; b < mr; ++b) {
        const int q = a * mr + b;
        yr1[q] = -R + a * rstep;
        yr2[q] = -R + b * rstep;
        const double wa = (a == 0 || a == mr - 1) ? 0.5 * rstep : rstep;
        const double wb = (b == 0 || b == mr - 1) ? 0.5 * rstep : rstep;
        wr[q] = wa * wb;
        phi[q] = h.eval(yr1[q], yr2[q], std::nullopt, true);
      }
  }
  int nr() const { return mr * mr; }
  std::size_t nx() const {
    return static_cast<std::size_t>(dax.count) * dax.count * xax.count *
           xax.count;
  }
  std::size_t ny() const {
    return static_cast<std::size_t>(nr()) * xax.count * xax.count;
  }
};

// forward: out(q, c) = phi_q [G_rot(t) v](eps yr_q, c); adjoint transposed
void eps_incoming_apply(const EpsOpWork& w, double t, double eps,
                        const std::vector<double>& vin, std::vector<double>& out,
                        bool adjoint) {
  const int md = w.dax.count, mx = w.xax.count;
  const int n2 = md * md, nx2 = mx * mx;
  const int nr = w.nr();
  // interpolation weights of point (eps yr_q) on the Delta grid (bilinear)
  auto interp_row = [&](int q, std::vector<std::pair<int, double>>& row) {
    row.clear();
    const double p1 = (eps * w.yr1[q] - w.dax.lo) / w.dax.step;
    const double p2 = (eps * w.yr2[q] - w.dax.lo) / w.dax.step;
    const int i1 = std::clamp(static_cast<int>(std::floor(p1)), 0, md - 2);
    const int i2 = std::clamp(static_cast<int>(std::floor(p2)), 0, md - 2);
    const double f1 = p1 - i1, f2 = p2 - i2;
    row.push_back({i1 * md + i2, (1 - f1) * (1 - f2)});
    row.push_back({i1 * md + i2 + 1, (1 - f1) * f2});
    row.push_back({(i1 + 1) * md + i2, f1 * (1 - f2)});
    row.push_back({(i1 + 1) * md + i2 + 1, f1 * f2});
  };
  std::vector<std::pair<int, double>> row;
  if (!adjoint) {
    GridFunction g;
    g.spec = GridSpec{{w.dax, w.dax, w.xax, w.xax}};
    g.v = vin;
    for (int ax = 0; ax < 4; ++ax)
      gauss_conv_axis(g, ax, ax < 2 ? 2.0 * t : 0.5 * t, true);
    out.assign(w.ny(), 0.0);
    for (int q = 0; q < nr; ++q) {
      if (w.phi[q] == 0.0) continue;
      interp_row(q, row);
      for (int xc = 0; xc < nx2; ++xc) {
        double acc = 0.0;
        for (const auto& [dn, wt] : row)
          acc += wt * g.v[static_cast<std::size_t>(dn) * nx2 + xc];
        out[static_cast<std::size_t>(q) * nx2 + xc] = w.phi[q] * acc;
      }
    }
  } else {
    // scatter then G_rot^T
    GridFunction g;
    g.spec = GridSpec{{w.dax, w.dax, w.xax, w.xax}};
    g.v.assign(w.nx(), 0.0);
    for (int q = 0; q < nr; ++q) {
      if (w.phi[q] == 0.0) continue;
      interp_row(q, row);
      for (int xc = 0; xc < nx2; ++xc) {
        const double val =
            w.phi[q] * vin[static_cast<std::size_t>(q) * nx2 + xc];
        if (val == 0.0) continue;
        for (const auto& [dn, wt] : row)
          g.v[static_cast<std::size_t>(dn) * nx2 + xc] += wt * val;
      }
    }
    for (int ax = 0; ax < 4; ++ax)
      gauss_conv_axis_adjoint(g, ax, ax < 2 ? 2.0 * t : 0.5 * t, true);
    out = g.v;
  }
}

// y_r collision factor phi hk_eps(2t) phi (in-weights folded), as in k_matrix
std::vector<double> yr_factor_matrix(const EpsOpWork& w, double t, double eps,
                                     double R) {
  const double v = 2.0 * t / (eps * eps);
  const double sd = std::sqrt(v);
  const int nr = w.nr();
  std::vector<double> K(static_cast<std::size_t>(nr) * nr);
  auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  for (int a = 0; a < nr; ++a) {
    double disc = 0.0;
    double* rowp = &K[static_cast<std::size_t>(a) * nr];
    for (int b = 0; b < nr; ++b) {
      const double g = gauss1d(v, w.yr1[a] - w.yr1[b]) *
                       gauss1d(v, w.yr2[a] - w.yr2[b]) / (eps * eps);
      rowp[b] = g;
      disc += g * w.wr[b];
    }
    const double exact = (cdf((R - w.yr1[a]) / sd) - cdf((-R - w.yr1[a]) / sd)) *
                         (cdf((R - w.yr2[a]) / sd) - cdf((-R - w.yr2[a]) / sd)) /
                         (eps * eps);
    const double rn = disc > 1e-300 ? exact / disc : 0.0;
    for (int b = 0; b < nr; ++b) rowp[b] *= rn * w.phi[a] * w.phi[b] * w.wr[b];
  }
  return K;
}

double power_iterate(std::size_t dim,
                     const std::function<void(const std::vector<double>&,
                                              std::vector<double>&, bool)>& op,
                     int iters, std::uint64_t seed) {
  std::vector<double> v(dim), u, z;
  CounterRng rng(seed, 11u);
  for (auto& x : v) x = rng.normal();
  double sigma = 0.0;
  for (int it = 0; it < iters; ++it) {
    op(v, u, false);
    op(u, z, true);
    double nv = 0.0, nz = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      nv += v[i] * v[i];
      nz += z[i] * z[i];
    }
    sigma = std::pow(nz / nv, 0.25);
    nz = std::sqrt(nz);
    for (std::size_t i = 0; i < dim; ++i) v[i] = z[i] / nz;
  }
  return sigma;
}

}  // namespace

double opnorm_eps_incoming(double t, const VerifyGrids& g,
                           const VerifyContext& ctx) {
  EpsOpWork w(g, *ctx.mollifier, g.mr);
  const double eps = ctx.params.eps;
  // balance the discrete measures: S = D_out^{1/2} A D_in^{-1/2}
  const int nx2 = g.xax.count * g.xax.count;
  std::vector<double> sq_in(w.nx()), sq_out(w.ny());
  {
    std::size_t lin = 0;
    for (int d1 = 0; d1 < g.dax.count; ++d1)
      for (int d2 = 0; d2 < g.dax.count; ++d2)
        for (int x1 = 0; x1 < g.xax.count; ++x1)
          for (int x2 = 0; x2 < g.xax.count; ++x2)
            sq_in[lin++] = std::sqrt(g.dax.weight(d1) * g.dax.weight(d2) *
                                     g.xax.weight(x1) * g.xax.weight(x2));
    lin = 0;
    for (int q = 0; q < w.nr(); ++q)
      for (int x1 = 0; x1 < g.xax.count; ++x1)
        for (int x2 = 0; x2 < g.xax.count; ++x2)
          sq_out[lin++] =
              std::sqrt(w.wr[q] * g.xax.weight(x1) * g.xax.weight(x2));
  }
  auto op = [&](const std::vector<double>& vin, std::vector<double>& out,
                bool adjoint) {
    if (!adjoint) {
      std::vector<double> v(vin.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = vin[i] / sq_in[i];
      eps_incoming_apply(w, t, eps, v, out, false);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] *= sq_out[i];
    } else {
      std::vector<double> v(vin.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = vin[i] * sq_out[i];
      eps_incoming_apply(w, t, eps, v, out, true);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] /= sq_in[i];
    }
  };
  (void)nx2;
  return power_iterate(w.nx(), op, g.iters, g.seed);
}

double opnorm_eps_self_swapping(double t, const VerifyGrids& g,
                                const VerifyContext& ctx) {
  EpsOpWork w(g, *ctx.mollifier, g.mr);
  const double eps = ctx.params.eps;
  const double R = ctx.mollifier->support_radius();
  const auto K = yr_factor_matrix(w, t, eps, R);
  const int nr = w.nr();
  // y_r factor norm: balanced power iteration on K
  std::vector<double> S(K.size());
  for (int a = 0; a < nr; ++a)
    for (int b = 0; b < nr; ++b)
      S[static_cast<std::size_t>(a) * nr + b] =
          K[static_cast<std::size_t>(a) * nr + b] *
          std::sqrt(w.wr[a] / w.wr[b]);
  auto opk = [&](const std::vector<double>& vin, std::vector<double>& out,
                 bool adjoint) {
    out.assign(nr, 0.0);
    for (int a = 0; a < nr; ++a) {
      const double* rowp = &S[static_cast<std::size_t>(a) * nr];
      if (!adjoint) {
        double acc = 0.0;
        for (int b = 0; b < nr; ++b) acc += rowp[b] * vin[b];
        out[a] = acc;
      } else {
        for (int b = 0; b < nr; ++b) out[b] += rowp[b] * vin[a];
      }
    }
  };
  const double nyr = power_iterate(nr, opk, g.iters, g.seed + 1);
  // y_c factor: 2-d Gaussian conv norm on the xax grid
  auto opc = [&](const std::vector<double>& vin, std::vector<double>& out,
                 bool adjoint) {
    GridFunction gf;
    gf.spec = GridSpec{{g.xax, g.xax}};
    gf.v = vin;
    // balanced: D^{1/2} conv D^{-1/2}
    std::size_t lin = 0;
    for (int x1 = 0; x1 < g.xax.count; ++x1)
      for (int x2 = 0; x2 < g.xax.count; ++x2)
        gf.v[lin++] /= std::sqrt(g.xax.weight(x1) * g.xax.weight(x2));
    if (adjoint) {
      gauss_conv_axis_adjoint(gf, 0, 0.5 * t, true);
      gauss_conv_axis_adjoint(gf, 1, 0.5 * t, true);
    } else {
      gauss_conv_axis(gf, 0, 0.5 * t, true);
      gauss_conv_axis(gf, 1, 0.5 * t, true);
    }
    lin = 0;
    for (int x1 = 0; x1 < g.xax.count; ++x1)
      for (int x2 = 0; x2 < g.xax.count; ++x2)
        gf.v[lin] *= std::sqrt(g.xax.weight(x1) * g.xax.weight(x2)), ++lin;
    out = gf.v;
  };
  const double nyc = power_iterate(
      static_cast<std::size_t>(g.xax.count) * g.xax.count, opc, g.iters,
      g.seed + 2);
  return nyr * nyc;
}

double opnorm_eps_swapping_timeint(const VerifyGrids& g,
                                   const VerifyContext& ctx) {
  EpsOpWork w(g, *ctx.mollifier, g.mr);
  const double eps = ctx.params.eps;
  const double R = ctx.mollifier->support_radius();
  // e^{-t} time quadrature: [0,1] with t = s^2 grading + [1, 40]
  std::vector<double> ts, tw;
  {
    std::vector<double> x, wt;
    gauss_legendre_ab(16, 0.0, 1.0, x, wt);
    for (int i = 0; i < 16; ++i) {
      ts.push_back(x[i] * x[i]);
      tw.push_back(2.0 * x[i] * wt[i] * std::exp(-x[i] * x[i]));
    }
    gauss_legendre_ab(24, 1.0, 40.0, x, wt);
    for (int i = 0; i < 24; ++i) {
      ts.push_back(x[i]);
      tw.push_back(wt[i] * std::exp(-x[i]));
    }
  }
  std::vector<std::vector<double>> Ks(ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k)
    Ks[k] = yr_factor_matrix(w, ts[k], eps, R);
  const int nr = w.nr();
  const int nx2 = g.xax.count * g.xax.count;
  const std::size_t dim = static_cast<std::size_t>(nr) * nx2;
  std::vector<double> sqw(dim);
  {
    std::size_t lin = 0;
    for (int q = 0; q < nr; ++q)
      for (int x1 = 0; x1 < g.xax.count; ++x1)
        for (int x2 = 0; x2 < g.xax.count; ++x2)
          sqw[lin++] =
              std::sqrt(w.wr[q] * g.xax.weight(x1) * g.xax.weight(x2));
  }
  auto op = [&](const std::vector<double>& vin, std::vector<double>& out,
                bool adjoint) {
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < dim; ++i)
      v[i] = adjoint ? vin[i] * sqw[i] : vin[i] / sqw[i];
    out.assign(dim, 0.0);
    std::vector<double> tmp(dim);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      // y_c conv
      GridFunction gf;
      gf.spec = GridSpec{{g.xax, g.xax}};
      std::fill(tmp.begin(), tmp.end(), 0.0);
      // apply (K (x) conv): conv per y_r row, then K across rows
      std::vector<double> stage(dim, 0.0);
      for (int q = 0; q < nr; ++q) {
        gf.v.assign(v.begin() + static_cast<std::size_t>(q) * nx2,
                    v.begin() + static_cast<std::size_t>(q + 1) * nx2);
        if (adjoint) {
          gauss_conv_axis_adjoint(gf, 0, 0.5 * ts[k], true);
          gauss_conv_axis_adjoint(gf, 1, 0.5 * ts[k], true);
        } else {
          gauss_conv_axis(gf, 0, 0.5 * ts[k], true);
          gauss_conv_axis(gf, 1, 0.5 * ts[k], true);
        }
        std::copy(gf.v.begin(), gf.v.end(),
                  stage.begin() + static_cast<std::size_t>(q) * nx2);
      }
      const auto& K = Ks[k];
      for (int a = 0; a < nr; ++a) {
        const double* rowp = &K[static_cast<std::size_t>(a) * nr];
        for (int b = 0; b < nr; ++b) {
          const double kv = adjoint ? K[static_cast<std::size_t>(b) * nr + a]
                                    : rowp[b];
          if (kv == 0.0) continue;
          const double cw = tw[k] * kv;
          const double* src = &stage[static_cast<std::size_t>(b) * nx2];
          double* dst = &tmp[static_cast<std::size_t>(a) * nx2];
          for (int j = 0; j < nx2; ++j) dst[j] += cw * src[j];
        }
      }
      for (std::size_t i = 0; i < dim; ++i) out[i] += tmp[i];
    }
    for (std::size_t i = 0; i < dim; ++i)
      out[i] = adjoint ? out[i] / sqw[i] : out[i] * sqw[i];
  };
  return power_iterate(dim, op, g.iters, g.seed + 3);
}

double opnorm_eps_incoming_weighted(double t, double a, const VerifyGrids& g,
                                    const VerifyContext& ctx) {
  EpsOpWork w(g, *ctx.mollifier, g.mr);
  const double eps = ctx.params.eps;
  const int mx = g.xax.count;
  const int nx2 = mx * mx;
  std::vector<double> sq_in(w.nx()), sq_out(w.ny());
  {
    std::size_t lin = 0;
    for (int d1 = 0; d1 < g.dax.count; ++d1)
      for (int d2 = 0; d2 < g.dax.count; ++d2)
        for (int x1 = 0; x1 < mx; ++x1)
          for (int x2 = 0; x2 < mx; ++x2) {
            const double ww =
                std::abs(g.xax.node(x1) + 0.5 * g.dax.node(d1)) +
                std::abs(g.xax.node(x1) - 0.5 * g.dax.node(d1)) +
                std::abs(g.xax.node(x2) + 0.5 * g.dax.node(d2)) +
                std::abs(g.xax.node(x2) - 0.5 * g.dax.node(d2));
            sq_in[lin++] = std::sqrt(g.dax.weight(d1) * g.dax.weight(d2) *
                                     g.xax.weight(x1) * g.xax.weight(x2)) *
                           std::exp(a * ww);
          }
    lin = 0;
    for (int q = 0; q < w.nr(); ++q)
      for (int x1 = 0; x1 < mx; ++x1)
        for (int x2 = 0; x2 < mx; ++x2) {
          double ww = 0.0;
          for (int sigma : {+1, -1})
            ww += std::abs(g.xax.node(x1) + 0.5 * sigma * eps * w.yr1[q]) +
                  std::abs(g.xax.node(x2) + 0.5 * sigma * eps * w.yr2[q]);
          sq_out[lin++] =
              std::sqrt(w.wr[q] * g.xax.weight(x1) * g.xax.weight(x2)) *
              std::exp(a * ww);
        }
  }
  auto op = [&](const std::vector<double>& vin, std::vector<double>& out,
                bool adjoint) {
    std::vector<double> v(vin.size());
    if (!adjoint) {
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = vin[i] / sq_in[i];
      eps_incoming_apply(w, t, eps, v, out, false);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] *= sq_out[i];
    } else {
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = vin[i] * sq_out[i];
      eps_incoming_apply(w, t, eps, v, out, true);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] /= sq_in[i];
    }
  };
  return power_iterate(w.nx(), op, g.iters, g.seed + 5);
}

double opnorm_lim_incoming_weighted(double t, double a, const VerifyGrids& g,
                                    const VerifyContext& ctx) {
  (void)ctx;
  const int md = g.dax.count, mx = g.xax.count;
  if (md % 2 == 0)
    throw std::invalid_argument("lim incoming norm needs an odd Delta grid");
  const int mid = (md - 1) / 2;
  const int nx2 = mx * mx;
  const std::size_t nin = static_cast<std::size_t>(md) * md * nx2;
  const std::size_t nout = nx2;
  std::vector<double> sq_in(nin), sq_out(nout);
  {
    std::size_t lin = 0;
    for (int d1 = 0; d1 < md; ++d1)
      for (int d2 = 0; d2 < md; ++d2)
        for (int x1 = 0; x1 < mx; ++x1)
          for (int x2 = 0; x2 < mx; ++x2) {
            const double ww = std::abs(g.xax.node(x1) + 0.5 * g.dax.node(d1)) +
                              std::abs(g.xax.node(x1) - 0.5 * g.dax.node(d1)) +
                              std::abs(g.xax.node(x2) + 0.5 * g.dax.node(d2)) +
                              std::abs(g.xax.node(x2) - 0.5 * g.dax.node(d2));
            sq_in[lin++] = std::sqrt(g.dax.weight(d1) * g.dax.weight(d2) *
                                     g.xax.weight(x1) * g.xax.weight(x2)) *
                           std::exp(a * ww);
          }
    lin = 0;
    for (int x1 = 0; x1 < mx; ++x1)
      for (int x2 = 0; x2 < mx; ++x2)
        sq_out[lin++] = std::sqrt(g.xax.weight(x1) * g.xax.weight(x2)) *
                        std::exp(2.0 * a * (std::abs(g.xax.node(x1)) +
                                            std::abs(g.xax.node(x2))));
  }
  auto op = [&](const std::vector<double>& vin, std::vector<double>& out,
                bool adjoint) {
    if (!adjoint) {
      GridFunction gf;
      gf.spec = GridSpec{{g.dax, g.dax, g.xax, g.xax}};
      gf.v.resize(nin);
      for (std::size_t i = 0; i < nin; ++i) gf.v[i] = vin[i] / sq_in[i];
      for (int ax = 0; ax < 4; ++ax)
        gauss_conv_axis(gf, ax, ax < 2 ? 2.0 * t : 0.5 * t, true);
      out.assign(nout, 0.0);
      const std::size_t base =
          (static_cast<std::size_t>(mid) * md + mid) * nx2;
      for (std::size_t i = 0; i < nout; ++i)
        out[i] = gf.v[base + i] * sq_out[i];
    } else {
      GridFunction gf;
      gf.spec = GridSpec{{g.dax, g.dax, g.xax, g.xax}};
      gf.v.assign(nin, 0.0);
      const std::size_t base =
          (static_cast<std::size_t>(mid) * md + mid) * nx2;
      for (std::size_t i = 0; i < nout; ++i) gf.v[base + i] = vin[i] * sq_out[i];
      for (int ax = 0; ax < 4; ++ax)
        gauss_conv_axis_adjoint(gf, ax, ax < 2 ? 2.0 * t : 0.5 * t, true);
      out.resize(nin);
      for (std::size_t i = 0; i < nin; ++i) out[i] = gf.v[i] / sq_in[i];
    }
  };
  // forward maps nin -> nout; power iterate on T^T T over the input space
  std::vector<double> v(nin), u, z;
  CounterRng rng(g.seed + 6, 11u);
  for (auto& x : v) x = rng.normal();
  double sigma = 0.0;
  for (int it = 0; it < g.iters; ++it) {
    op(v, u, false);
    op(u, z, true);
    double nv = 0.0, nz = 0.0;
    for (std::size_t i = 0; i < nin; ++i) {
      nv += v[i] * v[i];
      nz += z[i] * z[i];
    }
    sigma = std::pow(nz / nv, 0.25);
    nz = std::sqrt(nz);
    for (std::size_t i = 0; i < nin; ++i) v[i] = z[i] / nz;
  }
  return sigma;
}

double opnorm_lim_jop_weighted(double t, double a, const VerifyGrids& g,
                               const VerifyContext& ctx) {
  // J(t) on Y = R^2 (n = 2): 4 pi j(t) g(t/2)-conv with weight exp(2a|yc|_1)
  const int mx = g.xax.count;
  const std::size_t dim = static_cast<std::size_t>(mx) * mx;
  const double scale =
      4.0 * M_PI * (ctx.jtable ? (*ctx.jtable)(t) : volterra_j(t, ctx.theta).value);
  std::vector<double> sqw(dim);
  {
    std::size_t lin = 0;
    for (int x1 = 0; x1 < mx; ++x1)
      for (int x2 = 0; x2 < mx; ++x2)
        sqw[lin++] = std::sqrt(g.xax.weight(x1) * g.xax.weight(x2)) *
                     std::exp(2.0 * a * (std::abs(g.xax.node(x1)) +
                                         std::abs(g.xax.node(x2))));
  }
  auto op = [&](const std::vector<double>& vin, std::vector<double>& out,
                bool adjoint) {
    GridFunction gf;
    gf.spec = GridSpec{{g.xax, g.xax}};
    gf.v.resize(dim);
    for (std::size_t i = 0; i < dim; ++i)
      gf.v[i] = adjoint ? vin[i] * sqw[i] : vin[i] / sqw[i];
    if (adjoint) {
      gauss_conv_axis_adjoint(gf, 0, 0.5 * t, true);
      gauss_conv_axis_adjoint(gf, 1, 0.5 * t, true);
    } else {
      gauss_conv_axis(gf, 0, 0.5 * t, true);
      gauss_conv_axis(gf, 1, 0.5 * t, true);
    }
    out.resize(dim);
    for (std::size_t i = 0; i < dim; ++i)
      out[i] = scale * (adjoint ? gf.v[i] / sqw[i] : gf.v[i] * sqw[i]);
  };
  return power_iterate(dim, op, g.iters, g.seed + 7);
}

double opnorm_eps_jop_weighted(double t, double a, const VerifyGrids& g,
                               const VerifyContext& ctx,
                               const CollisionEvaluator& ev,
                               const CollisionEvaluator::JepsMatrixTable& table) {
  // J^eps(t) = j^eps(t) (x) g(t/2) with the eps-space weight
  const int nu = static_cast<int>(table.mats.size()) - 1;
  const double p = std::clamp(t / table.h, 1.0, static_cast<double>(nu));
  const int i0 = std::min(static_cast<int>(std::floor(p)), nu - 1);
  const double f = p - i0;
  const int nr = ev.nr();
  std::vector<double> J(static_cast<std::size_t>(nr) * nr);
  for (std::size_t k = 0; k < J.size(); ++k)
    J[k] = (1.0 - f) * table.mats[i0][k] + f * table.mats[i0 + 1][k];

  const int mx = g.xax.count;
  const int nx2 = mx * mx;
  const std::size_t dim = static_cast<std::size_t>(nr) * nx2;
  const double eps = ctx.params.eps;
  std::vector<double> sqw(dim);
  {
    std::size_t lin = 0;
    for (int q = 0; q < nr; ++q)
      for (int x1 = 0; x1 < mx; ++x1)
        for (int x2 = 0; x2 < mx; ++x2) {
          double ww = 0.0;
          for (int sigma : {+1, -1})
            ww += std::abs(g.xax.node(x1) +
                           0.5 * sigma * eps * ev.yr_nodes_x()[q]) +
                  std::abs(g.xax.node(x2) +
                           0.5 * sigma * eps * ev.yr_nodes_y()[q]);
          sqw[lin++] =
              std::sqrt(ev.yr_weights()[q] * g.xax.weight(x1) *
                        g.xax.weight(x2)) *
              std::exp(a * ww);
        }
  }
  auto op = [&](const std::vector<double>& vin, std::vector<double>& out,
                bool adjoint) {
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < dim; ++i)
      v[i] = adjoint ? vin[i] * sqw[i] : vin[i] / sqw[i];
    // conv on y_c per y_r row
    GridFunction gf;
    gf.spec = GridSpec{{g.xax, g.xax}};
    std::vector<double> stage(dim);
    for (int q = 0; q < nr; ++q) {
      gf.v.assign(v.begin() + static_cast<std::size_t>(q) * nx2,
                  v.begin() + static_cast<std::size_t>(q + 1) * nx2);
      if (adjoint) {
        gauss_conv_axis_adjoint(gf, 0, 0.5 * t, true);
        gauss_conv_axis_adjoint(gf, 1, 0.5 * t, true);
      } else {
        gauss_conv_axis(gf, 0, 0.5 * t, true);
        gauss_conv_axis(gf, 1, 0.5 * t, true);
      }
      std::copy(gf.v.begin(), gf.v.end(),
                stage.begin() + static_cast<std::size_t>(q) * nx2);
    }
    out.assign(dim, 0.0);
    for (int aq = 0; aq < nr; ++aq)
      for (int bq = 0; bq < nr; ++bq) {
        const double kv = adjoint ? J[static_cast<std::size_t>(bq) * nr + aq]
                                  : J[static_cast<std::size_t>(aq) * nr + bq];
        if (kv == 0.0) continue;
        const double* src = &stage[static_cast<std::size_t>(bq) * nx2];
        double* dst = &out[static_cast<std::size_t>(aq) * nx2];
        for (int j = 0; j < nx2; ++j) dst[j] += kv * src[j];
      }
    for (std::size_t i = 0; i < dim; ++i)
      out[i] = adjoint ? out[i] / sqw[i] : out[i] * sqw[i];
  };
  return power_iterate(dim, op, g.iters, g.seed + 8);
}

// ------------------- verify_bounds ----------------------------------------

namespace {

double fit_constant(const std::vector<double>& lhs,
                    const std::vector<double>& rhs) {
  double c = 0.0;
  for (std::size_t i = 0; i < lhs.size(); ++i)
    c = std::max(c, lhs[i] / rhs[i]);
  return c;
}

VerifyGrids refined(const VerifyGrids& g) {
  VerifyGrids f = g;
  f.dax = Axis::symmetric(std::abs(g.dax.lo),
                          static_cast<int>(g.dax.count * g.refine) | 1);
  f.xax = Axis::symmetric(std::abs(g.xax.lo),
                          static_cast<int>(g.xax.count * g.refine) | 1);
  f.mr = static_cast<int>(g.mr * g.refine) | 1;
  return f;
}

BoundCheck check_hk_comp(const VerifyGrids& g) {
  BoundCheck bc;
  bc.bound = "hk_comp";
  bc.samples = g.hk_samples;
  CounterRng rng(g.seed, 99u);
  std::int64_t bad = 0;
  for (std::int64_t s = 0; s < g.hk_samples; ++s) {
    const double t = 0.01 + 3.0 * rng.uniform();
    const double a = 0.05 + 2.0 * rng.uniform();
    const double x1 = 4.0 * (rng.uniform() - 0.5), x2 = 4.0 * (rng.uniform() - 0.5);
    const double y1 = 4.0 * (rng.uniform() - 0.5), y2 = 4.0 * (rng.uniform() - 0.5);
    const double lhs = heat2d(t, x1 - y1, x2 - y2) *
                       std::exp(a * ((std::abs(y1) + std::abs(y2)) -
                                     (std::abs(x1) + std::abs(x2))));
    const double rhs = 2.0 * std::exp(2.0 * a * t) * heat2d(2.0 * t, x1 - y1, x2 - y2);
    if (lhs > rhs * (1.0 + 1e-12)) ++bad;
  }
  bc.violations = bad;
  bc.pass = bad == 0;
  bc.fitted_c = 0.0;
  return bc;
}

}  // namespace

std::vector<BoundCheck> verify_bounds(BoundFamily family,
                                      const VerifyGrids& grids,
                                      const VerifyContext& ctx) {
  std::vector<BoundCheck> out;
  if (family == BoundFamily::hk_comp) {
    out.push_back(check_hk_comp(grids));
    return out;
  }
  const VerifyGrids fine = refined(grids);

  if (family == BoundFamily::bds_eps) {
    // (e.bd.incoming.e): ||g^eps_alpha(t)|| <= c t^{-1/2}
    {
      BoundCheck bc;
      bc.bound = "bd_incoming_eps";
      for (double t : grids.ts) {
        bc.ts.push_back(t);
        bc.lhs.push_back(opnorm_eps_incoming(t, grids, ctx));
        bc.rhs_shape.push_back(1.0 / std::sqrt(t));
      }
      bc.fitted_c = fit_constant(bc.lhs, bc.rhs_shape);
      std::vector<double> lf, rf;
      for (double t : fine.ts) {
        lf.push_back(opnorm_eps_incoming(t, fine, ctx));
        rf.push_back(1.0 / std::sqrt(t));
      }
      bc.fitted_c_refined = fit_constant(lf, rf);
      bc.refinement_delta =
          std::abs(bc.fitted_c_refined - bc.fitted_c) / bc.fitted_c;
      bc.pass = bc.refinement_delta <= 0.2;
      out.push_back(bc);
    }
    // (e.bd.swapping.e): ||g^eps_{aa}(t)|| <= c t^{-1}
    {
      BoundCheck bc;
      bc.bound = "bd_swapping_eps";
      for (double t : grids.ts) {
        bc.ts.push_back(t);
        bc.lhs.push_back(opnorm_eps_self_swapping(t, grids, ctx));
        bc.rhs_shape.push_back(1.0 / t);
      }
      bc.fitted_c = fit_constant(bc.lhs, bc.rhs_shape);
      std::vector<double> lf, rf;
      for (double t : fine.ts) {
        lf.push_back(opnorm_eps_self_swapping(t, fine, ctx));
        rf.push_back(1.0 / t);
      }
      bc.fitted_c_refined = fit_constant(lf, rf);
      bc.refinement_delta =
          std::abs(bc.fitted_c_refined - bc.fitted_c) / bc.fitted_c;
      bc.pass = bc.refinement_delta <= 0.2;
      out.push_back(bc);
    }
    // (e.bd.swapping.int.e): || int e^{-t} g^eps_{aa}(t) dt || <= c
    {
      BoundCheck bc;
      bc.bound = "bd_swapping_int_eps";
      bc.ts.push_back(0.0);
      bc.lhs.push_back(opnorm_eps_swapping_timeint(grids, ctx));
      bc.rhs_shape.push_back(1.0);
      bc.fitted_c = bc.lhs[0];
      bc.fitted_c_refined = opnorm_eps_swapping_timeint(fine, ctx);
      bc.refinement_delta =
          std::abs(bc.fitted_c_refined - bc.fitted_c) / bc.fitted_c;
      bc.pass = bc.refinement_delta <= 0.2;
      out.push_back(bc);
    }
    // (e.bd.Jop.e) via B_eps: ||j^eps(t)|| <= B_eps(t) pointwise
    {
      BoundCheck bc;
      bc.bound = "jeps_vs_Beps";
      CollisionOptions opt;
      opt.mr = grids.mr;
      opt.nu = 160;
      CollisionEvaluator ev(*ctx.mollifier, ctx.params, ctx.theta, ctx.jtable,
                            opt);
      const double tmax =
          *std::max_element(grids.ts.begin(), grids.ts.end());
      const auto table = ev.jeps_matrix_table(tmax, 160);
      bool ok = true;
      for (double t : grids.ts) {
        const double lhs = ev.jeps_opnorm(table, t);
        const double rhs = b_eps_contour(t, ctx.params);
        bc.ts.push_back(t);
        bc.lhs.push_back(lhs);
        bc.rhs_shape.push_back(rhs);
        if (!(lhs <= rhs)) ok = false;
      }
      bc.fitted_c = fit_constant(bc.lhs, bc.rhs_shape);
      bc.pass = ok;
      out.push_back(bc);
    }
    return out;
  }

  // comp / comp_eps: weighted norms vs their 2t-dilated unweighted analogs
  const bool eps_family = family == BoundFamily::comp_eps;
  {
    BoundCheck bc;
    bc.bound = eps_family ? "comp_eps_incoming" : "comp_incoming";
    auto run = [&](const VerifyGrids& g, std::vector<double>& lhs,
                   std::vector<double>& rhs) {
      for (double t : g.ts) {
        if (eps_family) {
          lhs.push_back(opnorm_eps_incoming_weighted(t, g.a, g, ctx));
          rhs.push_back(opnorm_eps_incoming(2.0 * t, g, ctx));
        } else {
          lhs.push_back(opnorm_lim_incoming_weighted(t, g.a, g, ctx));
          rhs.push_back(opnorm_lim_incoming_weighted(2.0 * t, 0.0, g, ctx));
        }
      }
    };
    bc.ts = grids.ts;
    run(grids, bc.lhs, bc.rhs_shape);
    bc.fitted_c = fit_constant(bc.lhs, bc.rhs_shape);
    std::vector<double> lf, rf;
    run(fine, lf, rf);
    bc.fitted_c_refined = fit_constant(lf, rf);
    bc.refinement_delta =
        std::abs(bc.fitted_c_refined - bc.fitted_c) / bc.fitted_c;
    bc.pass = bc.refinement_delta <= 0.25;
    out.push_back(bc);
  }
  {
    // Jop comparison: weighted norm vs the scalar 4 pi j(t) (limiting) or
    // the unweighted ||j^eps(t)|| (eps); heat factors have norm <= 1
    BoundCheck bc;
    bc.bound = eps_family ? "comp_eps_jop" : "comp_jop";
    CollisionOptions opt;
    opt.mr = grids.mr;
    CollisionEvaluator ev(*ctx.mollifier, ctx.params, ctx.theta, ctx.jtable,
                          opt);
    CollisionEvaluator::JepsMatrixTable table;
    if (eps_family) {
      const double tmax = *std::max_element(grids.ts.begin(), grids.ts.end());
      table = ev.jeps_matrix_table(tmax, 120);
    }
    for (double t : grids.ts) {
      bc.ts.push_back(t);
      if (eps_family) {
        bc.lhs.push_back(opnorm_eps_jop_weighted(t, grids.a, grids, ctx, ev, table));
        bc.rhs_shape.push_back(ev.jeps_opnorm(table, t));
      } else {
        bc.lhs.push_back(opnorm_lim_jop_weighted(t, grids.a, grids, ctx));
        bc.rhs_shape.push_back(4.0 * M_PI *
                               (ctx.jtable ? (*ctx.jtable)(t)
                                           : volterra_j(t, ctx.theta).value));
      }
    }
    bc.fitted_c = fit_constant(bc.lhs, bc.rhs_shape);
    bc.fitted_c_refined = bc.fitted_c;
    bc.refinement_delta = 0.0;
    bc.pass = std::isfinite(bc.fitted_c) && bc.fitted_c > 0.0;
    out.push_back(bc);
  }
  return out;
}

}  // namespace dbose
