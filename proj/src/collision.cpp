#include "dbose/collision.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dbose/parallel.hpp"
#include "dbose/quadrature.hpp"

namespace dbose {

namespace {

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// vector Catmull-Rom on a uniform table
void interp_vec(const std::vector<std::vector<double>>& tab, double h, double r,
                std::vector<double>& out) {
  const int n = static_cast<int>(tab.size());
  const double p = std::clamp(r / h, 0.0, n - 1.0);
  int i0 = static_cast<int>(std::floor(p));
  if (i0 > n - 2) i0 = n - 2;
  const double s = p - i0;
  const double s2 = s * s, s3 = s2 * s;
  const double w0 = 0.5 * (-s3 + 2 * s2 - s);
  const double w1 = 0.5 * (3 * s3 - 5 * s2 + 2);
  const double w2 = 0.5 * (-3 * s3 + 4 * s2 + s);
  const double w3 = 0.5 * (s3 - s2);
  auto row = [&](int i) -> const std::vector<double>& {
    return tab[std::clamp(i, 0, n - 1)];
  };
  const auto &a = row(i0 - 1), &b = row(i0), &c = row(i0 + 1), &d = row(i0 + 2);
  out.resize(b.size());
  for (std::size_t k = 0; k < b.size(); ++k)
    out[k] = w0 * a[k] + w1 * b[k] + w2 * c[k] + w3 * d[k];
}

}  // namespace

CollisionEvaluator::CollisionEvaluator(const MollifierHandle& h,
                                       const ScalarParams& params, double theta,
                                       const JTable* jtable,
                                       CollisionOptions opt)
    : h_(&h), params_(params), theta_(theta), jtable_(jtable), opt_(opt) {
  const double R = h.support_radius();
  const int mr = opt_.mr;
  nr_ = mr * mr;
  rstep_ = 2.0 * R / (mr - 1);
  yr1_.resize(nr_);
  yr2_.resize(nr_);
  wr_.resize(nr_);
  phi_.resize(nr_);
  for (int a = 0; a < mr; ++a)
    for (int b = 0; b < mr; ++b) {
      const int q = a * mr + b;
      yr1_[q] = -R + a * rstep_;
      yr2_[q] = -R + b * rstep_;
      const double wa = (a == 0 || a == mr - 1) ? 0.5 * rstep_ : rstep_;
      const double wb = (b == 0 || b == mr - 1) ? 0.5 * rstep_ : rstep_;
      wr_[q] = wa * wb;
      phi_[q] = h.eval(yr1_[q], yr2_[q], std::nullopt, true);
    }
}

std::vector<double> CollisionEvaluator::k_matrix(double u) const {
  const double eps = params_.eps;
  const double v = 2.0 * u / (eps * eps);  // per-axis variance in y_r
  const double sd = std::sqrt(v);
  const double R = h_->support_radius();
  std::vector<double> K(static_cast<std::size_t>(nr_) * nr_);
  // raw kernel and discrete row mass
  for (int a = 0; a < nr_; ++a) {
    double disc = 0.0;
    double* row = &K[static_cast<std::size_t>(a) * nr_];
    for (int b = 0; b < nr_; ++b) {
      const double d1 = yr1_[a] - yr1_[b];
      const double d2 = yr2_[a] - yr2_[b];
      const double g = gauss1d(v, d1) * gauss1d(v, d2) / (eps * eps);
      row[b] = g;
      disc += g * wr_[b];
    }
    const double exact =
        (norm_cdf((R - yr1_[a]) / sd) - norm_cdf((-R - yr1_[a]) / sd)) *
        (norm_cdf((R - yr2_[a]) / sd) - norm_cdf((-R - yr2_[a]) / sd)) /
        (eps * eps);
    const double rn = disc > 1e-300 ? exact / disc : 0.0;
    for (int b = 0; b < nr_; ++b)
      row[b] *= rn * phi_[a] * phi_[b] * wr_[b];
  }
  return K;
}

std::vector<double> CollisionEvaluator::gaussian_incoming(double s) const {
  const double eps = params_.eps;
  std::vector<double> V(nr_);
  for (int q = 0; q < nr_; ++q) {
    const double r2 = yr1_[q] * yr1_[q] + yr2_[q] * yr2_[q];
    V[q] = phi_[q] * std::exp(-eps * eps * r2 / (4.0 * s)) / (4.0 * M_PI * s);
  }
  return V;
}

CollisionEvaluator::EpsChain CollisionEvaluator::solve_eps_chain(
    double t) const {
  if (!(t > 0.0)) throw std::domain_error("solve_eps_chain: t <= 0");
  const double beta = params_.beta_eps;
  const int nu = opt_.nu;
  const double h = t / nu;

  // bin integrals of K by 3-point Gauss-Legendre
  std::vector<double> glx, glw;
  gauss_legendre(3, glx, glw);
  std::vector<std::vector<double>> kbin(nu);
  parallel_for(nu, [&](std::size_t j) {
    std::vector<double> acc(static_cast<std::size_t>(nr_) * nr_, 0.0);
    for (int g = 0; g < 3; ++g) {
      const double s = (j + 0.5 + 0.5 * glx[g]) * h;
      const double w = 0.5 * h * glw[g];
      const std::vector<double> K = k_matrix(s);
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += w * K[k];
    }
    kbin[j] = std::move(acc);
  });

  auto matvec = [&](const std::vector<double>& M, const std::vector<double>& x,
                    std::vector<double>& y) {
    for (int a = 0; a < nr_; ++a) {
      const double* row = &M[static_cast<std::size_t>(a) * nr_];
      double acc = 0.0;
      for (int b = 0; b < nr_; ++b) acc += row[b] * x[b];
      y[a] += acc;
    }
  };

  EpsChain chain;
  chain.t = t;
  chain.h = h;
  chain.W.assign(nu + 1, std::vector<double>(nr_, 0.0));
  chain.W[0] = gaussian_incoming(opt_.sigma2);
  std::vector<double> rhs(nr_), tmp(nr_), avg(nr_);
  for (int i = 1; i <= nu; ++i) {
    const std::vector<double> Vi = gaussian_incoming(opt_.sigma2 + i * h);
    rhs = Vi;
    // sum_{j>=1} Kbin[j] . avg(W[i-j-1], W[i-j])
    std::fill(tmp.begin(), tmp.end(), 0.0);
    for (int j = 1; j < i; ++j) {
      for (int a = 0; a < nr_; ++a)
        avg[a] = 0.5 * (chain.W[i - j - 1][a] + chain.W[i - j][a]);
      matvec(kbin[j], avg, tmp);
    }
    for (int a = 0; a < nr_; ++a) rhs[a] += beta * tmp[a];
    // implicit j = 0 bin: W[i] = rhs + beta Kbin[0] (W[i-1] + W[i]) / 2
    std::vector<double> Wi = chain.W[i - 1];
    for (int pass = 0; pass < 3; ++pass) {
      for (int a = 0; a < nr_; ++a) avg[a] = 0.5 * (chain.W[i - 1][a] + Wi[a]);
      std::vector<double> upd = rhs;
      std::fill(tmp.begin(), tmp.end(), 0.0);
      matvec(kbin[0], avg, tmp);
      for (int a = 0; a < nr_; ++a) upd[a] += beta * tmp[a];
      Wi = std::move(upd);
    }
    chain.W[i] = std::move(Wi);
  }
  return chain;
}

double CollisionEvaluator::heat_value(double t, Vec2 Delta, Vec2 Xbar) const {
  const double s = opt_.sigma2 + t;
  return heat2d(2.0 * s, Delta.x, Delta.y) * heat2d(0.5 * s, Xbar.x, Xbar.y);
}

double CollisionEvaluator::corr_eps_value(const EpsChain& chain, Vec2 Delta,
                                          Vec2 Xbar) const {
  const double t = chain.t;
  const double eps = params_.eps;
  std::vector<double> gx, gw, Wv;
  gauss_legendre_ab(opt_.n_tau0, 0.0, t, gx, gw);
  double val = 0.0;
  for (int k = 0; k < opt_.n_tau0; ++k) {
    const double tau0 = gx[k];
    interp_vec(chain.W, chain.h, t - tau0, Wv);
    double P = 0.0;
    const double tv = 2.0 * tau0;
    for (int q = 0; q < nr_; ++q) {
      if (phi_[q] == 0.0) continue;
      const double d1 = Delta.x - eps * yr1_[q];
      const double d2 = Delta.y - eps * yr2_[q];
      P += wr_[q] * phi_[q] * Wv[q] * heat2d(tv, d1, d2);
    }
    val += gw[k] * P;
  }
  const double vX = 0.5 * (opt_.sigma2 + t);
  return params_.beta_eps * val * heat2d(vX, Xbar.x, Xbar.y);
}

double CollisionEvaluator::corr_lim_value(double t, Vec2 Delta,
                                          Vec2 Xbar) const {
  std::vector<double> gx, gw, ux, uw;
  gauss_legendre_ab(opt_.n_tau0, 0.0, t, gx, gw);
  gauss_legendre_ab(opt_.n_u, 0.0, 1.0, ux, uw);
  double val = 0.0;
  for (int k = 0; k < opt_.n_tau0; ++k) {
    const double tau0 = gx[k];
    const double rem = t - tau0;
    double stot = 0.0;
    for (int l = 0; l < opt_.n_u; ++l) {
      // tau1 = rem e^{1 - 1/v}: exact map for the tau^{-1} log^{-2} weight
      const double v = ux[l];
      const double expo = 1.0 - 1.0 / v;
      if (expo < -60.0) {
        const double L = 1.0 / v - 1.0 + std::log(1.0 / rem);
        const double g = kEulerGamma;
        stot += uw[l] * (1.0 + 2.0 * (g + theta_) / L) / (v * v * L * L) /
                (opt_.sigma2 + rem);
        continue;
      }
      const double tau1 = rem * std::exp(expo);
      const double jac = tau1 / (v * v);
      const double tau2 = rem - tau1;
      const double jv = jtable_ ? (*jtable_)(tau1) : volterra_j(tau1, theta_).value;
      stot += uw[l] * jac * jv / (opt_.sigma2 + tau2);
    }
    val += gw[k] * stot * heat2d(2.0 * tau0, Delta.x, Delta.y);
  }
  const double vX = 0.5 * (opt_.sigma2 + t);
  return val * heat2d(vX, Xbar.x, Xbar.y);
}

void CollisionEvaluator::accumulate_delta_profile(
    const std::vector<double>& coef, double tau0, const Axis& dax,
    std::vector<double>& P) const {
  // P[d1, d2] += sum_q coef[q] g1(2tau0, d1 - eps yr1_q) g1(2tau0, d2 - eps yr2_q)
  const int mr = opt_.mr;
  const int md = dax.count;
  const double eps = params_.eps;
  const double tv = 2.0 * tau0;
  const double R = h_->support_radius();
  std::vector<double> T(static_cast<std::size_t>(mr) * md, 0.0);
  // stage 1 over the second y_r component
  for (int a = 0; a < mr; ++a) {
    for (int d2 = 0; d2 < md; ++d2) {
      double acc = 0.0;
      for (int b = 0; b < mr; ++b) {
        const double c = coef[a * mr + b];
        if (c == 0.0) continue;
        acc += c * gauss1d(tv, dax.node(d2) - eps * (-R + b * rstep_));
      }
      T[static_cast<std::size_t>(a) * md + d2] = acc;
    }
  }
  for (int d1 = 0; d1 < md; ++d1) {
    for (int a = 0; a < mr; ++a) {
      const double g = gauss1d(tv, dax.node(d1) - eps * (-R + a * rstep_));
      if (g == 0.0) continue;
      const double* Ta = &T[static_cast<std::size_t>(a) * md];
      double* row = &P[static_cast<std::size_t>(d1) * md];
      for (int d2 = 0; d2 < md; ++d2) row[d2] += g * Ta[d2];
    }
  }
}

GridFunction CollisionEvaluator::corr_eps_field(double t, const Axis& dax,
                                                const Axis& xax) const {
  const EpsChain chain = solve_eps_chain(t);
  const int md = dax.count, mx = xax.count;
  std::vector<double> gx, gw, Wv;
  gauss_legendre_ab(opt_.n_tau0, 0.0, t, gx, gw);
  std::vector<double> P(static_cast<std::size_t>(md) * md, 0.0);
  std::vector<double> coef(nr_);
  for (int k = 0; k < opt_.n_tau0; ++k) {
    interp_vec(chain.W, chain.h, t - gx[k], Wv);
    for (int q = 0; q < nr_; ++q)
      coef[q] = gw[k] * wr_[q] * phi_[q] * Wv[q];
    accumulate_delta_profile(coef, gx[k], dax, P);
  }
  const double vX = 0.5 * (opt_.sigma2 + t);
  GridFunction out(GridSpec{{dax, dax, xax, xax}});
  std::size_t lin = 0;
  for (int d1 = 0; d1 < md; ++d1)
    for (int d2 = 0; d2 < md; ++d2) {
      const double pv = params_.beta_eps * P[static_cast<std::size_t>(d1) * md + d2];
      for (int x1 = 0; x1 < mx; ++x1)
        for (int x2 = 0; x2 < mx; ++x2)
          out.v[lin++] = pv * heat2d(vX, xax.node(x1), xax.node(x2));
    }
  return out;
}

GridFunction CollisionEvaluator::corr_lim_field(double t, const Axis& dax,
                                                const Axis& xax) const {
  const int md = dax.count, mx = xax.count;
  std::vector<double> gx, gw, ux, uw;
  gauss_legendre_ab(opt_.n_tau0, 0.0, t, gx, gw);
  gauss_legendre_ab(opt_.n_u, 0.0, 1.0, ux, uw);
  std::vector<double> P(static_cast<std::size_t>(md) * md, 0.0);
  for (int k = 0; k < opt_.n_tau0; ++k) {
    const double tau0 = gx[k];
    const double rem = t - tau0;
    double stot = 0.0;
    for (int l = 0; l < opt_.n_u; ++l) {
      const double v = ux[l];
      const double expo = 1.0 - 1.0 / v;
      if (expo < -60.0) {
        const double L = 1.0 / v - 1.0 + std::log(1.0 / rem);
        stot += uw[l] * (1.0 + 2.0 * (kEulerGamma + theta_) / L) /
                (v * v * L * L) / (opt_.sigma2 + rem);
        continue;
      }
      const double tau1 = rem * std::exp(expo);
      const double jac = tau1 / (v * v);
      const double jv = jtable_ ? (*jtable_)(tau1) : volterra_j(tau1, theta_).value;
      stot += uw[l] * jac * jv / (opt_.sigma2 + (rem - tau1));
    }
    const double tv = 2.0 * tau0;
    for (int d1 = 0; d1 < md; ++d1) {
      const double g1v = gauss1d(tv, dax.node(d1));
      for (int d2 = 0; d2 < md; ++d2)
        P[static_cast<std::size_t>(d1) * md + d2] +=
            gw[k] * stot * g1v * gauss1d(tv, dax.node(d2));
    }
  }
  const double vX = 0.5 * (opt_.sigma2 + t);
  GridFunction out(GridSpec{{dax, dax, xax, xax}});
  std::size_t lin = 0;
  for (int d1 = 0; d1 < md; ++d1)
    for (int d2 = 0; d2 < md; ++d2) {
      const double pv = P[static_cast<std::size_t>(d1) * md + d2];
      for (int x1 = 0; x1 < mx; ++x1)
        for (int x2 = 0; x2 < mx; ++x2)
          out.v[lin++] = pv * heat2d(vX, xax.node(x1), xax.node(x2));
    }
  return out;
}

namespace {

// weighted L2 norm of a rotated-grid field: weight exp(2a(|X+D/2|_1+|X-D/2|_1))
double rotated_weighted_norm(const GridFunction& f, double a) {
  const Axis& dax = f.spec.axes[0];
  const Axis& xax = f.spec.axes[2];
  const int md = dax.count, mx = xax.count;
  // per-axis-pair weight table
  std::vector<double> E(static_cast<std::size_t>(md) * mx);
  for (int d = 0; d < md; ++d)
    for (int x = 0; x < mx; ++x) {
      const double w = std::abs(xax.node(x) + 0.5 * dax.node(d)) +
                       std::abs(xax.node(x) - 0.5 * dax.node(d));
      E[static_cast<std::size_t>(d) * mx + x] = std::exp(2.0 * a * w);
    }
  double total = 0.0;
  std::size_t lin = 0;
  for (int d1 = 0; d1 < md; ++d1)
    for (int d2 = 0; d2 < md; ++d2)
      for (int x1 = 0; x1 < mx; ++x1) {
        const double w1 = dax.weight(d1) * dax.weight(d2) * xax.weight(x1) *
                          E[static_cast<std::size_t>(d1) * mx + x1];
        for (int x2 = 0; x2 < mx; ++x2) {
          const double v = f.v[lin++];
          total += w1 * xax.weight(x2) *
                   E[static_cast<std::size_t>(d2) * mx + x2] * v * v;
        }
      }
  return std::sqrt(total);
}

}  // namespace

CollisionEvaluator::Distance CollisionEvaluator::convergence_distance(
    double t, double a, const Axis& dax, const Axis& xax) const {
  auto run = [&](const CollisionOptions& o) {
    CollisionEvaluator ev(*h_, params_, theta_, jtable_, o);
    GridFunction de = ev.corr_eps_field(t, dax, xax);
    const GridFunction dl = ev.corr_lim_field(t, dax, xax);
    for (std::size_t i = 0; i < de.v.size(); ++i) de.v[i] -= dl.v[i];
    return rotated_weighted_norm(de, a);
  };
  const double v0 = run(opt_);
  CollisionOptions fine = opt_;
  fine.nu = opt_.nu * 3 / 2;
  fine.n_tau0 = opt_.n_tau0 + 8;
  fine.n_u = opt_.n_u + 16;
  const double v1 = run(fine);
  return {v1, std::abs(v1 - v0)};
}

std::vector<double> CollisionEvaluator::collision_matrix_lim(
    double t, const Axis& dax) const {
  const int md = dax.count;
  const int n2 = md * md;
  std::vector<double> C(static_cast<std::size_t>(n2) * n2, 0.0);
  std::vector<double> gx, gw, ux, uw;
  gauss_legendre_ab(opt_.n_tau0, 0.0, t, gx, gw);
  gauss_legendre_ab(opt_.n_u, 0.0, 1.0, ux, uw);
  std::vector<double> gout(n2), gin(n2);
  for (int k = 0; k < opt_.n_tau0; ++k) {
    const double tau0 = gx[k];
    const double rem = t - tau0;
    for (int l = 0; l < opt_.n_u; ++l) {
      const double v = ux[l];
      const double expo = 1.0 - 1.0 / v;
      double tau1, jfac;
      if (expo < -60.0) {
        tau1 = 0.0;
        const double L = 1.0 / v - 1.0 + std::log(1.0 / rem);
        jfac = (1.0 + 2.0 * (kEulerGamma + theta_) / L) / (v * v * L * L);
      } else {
        tau1 = rem * std::exp(expo);
        const double jv =
            jtable_ ? (*jtable_)(tau1) : volterra_j(tau1, theta_).value;
        jfac = tau1 / (v * v) * jv;
      }
      const double tau2 = rem - tau1;
      const double w = gw[k] * uw[l] * 4.0 * M_PI * jfac;
      // C += w |g(2tau0, .)> <w_in g(2tau2, .)|
      for (int d1 = 0; d1 < md; ++d1)
        for (int d2 = 0; d2 < md; ++d2) {
          const int i = d1 * md + d2;
          gout[i] = heat2d(2.0 * tau0, dax.node(d1), dax.node(d2));
          gin[i] = heat2d(2.0 * tau2, dax.node(d1), dax.node(d2)) *
                   dax.weight(d1) * dax.weight(d2);
        }
      for (int i = 0; i < n2; ++i) {
        if (gout[i] == 0.0) continue;
        const double c = w * gout[i];
        double* row = &C[static_cast<std::size_t>(i) * n2];
        for (int j = 0; j < n2; ++j) row[j] += c * gin[j];
      }
    }
  }
  return C;
}

std::vector<double> CollisionEvaluator::collision_matrix_eps(
    double t, const Axis& dax) const {
  const int md = dax.count;
  const int n2 = md * md;
  const double beta = params_.beta_eps;
  const double eps = params_.eps;
  const int nu = opt_.nu;
  const double h = t / nu;

  // bin integrals of K
  std::vector<double> glx, glw;
  gauss_legendre(3, glx, glw);
  std::vector<std::vector<double>> kbin(nu);
  parallel_for(nu, [&](std::size_t j) {
    std::vector<double> acc(static_cast<std::size_t>(nr_) * nr_, 0.0);
    for (int g = 0; g < 3; ++g) {
      const double s = (j + 0.5 + 0.5 * glx[g]) * h;
      const double w = 0.5 * h * glw[g];
      const std::vector<double> K = k_matrix(s);
      for (std::size_t kk = 0; kk < acc.size(); ++kk) acc[kk] += w * K[kk];
    }
    kbin[j] = std::move(acc);
  });

  // E(r): Delta-grid -> y_r grid; W matrix march (nr x n2 states)
  auto eval_matrix = [&](double r) {
    std::vector<double> E(static_cast<std::size_t>(nr_) * n2);
    const double tv = 2.0 * r;  // conv variance per Delta axis
    const double sd = std::sqrt(tv);
    for (int q = 0; q < nr_; ++q) {
      double* row = &E[static_cast<std::size_t>(q) * n2];
      if (phi_[q] == 0.0) {
        std::fill(row, row + n2, 0.0);
        continue;
      }
      const double p1 = eps * yr1_[q], p2 = eps * yr2_[q];
      double disc = 0.0;
      for (int d1 = 0; d1 < md; ++d1)
        for (int d2 = 0; d2 < md; ++d2) {
          const double g = gauss1d(tv, p1 - dax.node(d1)) *
                           gauss1d(tv, p2 - dax.node(d2)) * dax.weight(d1) *
                           dax.weight(d2);
          row[d1 * md + d2] = g;
          disc += g;
        }
      const double exact =
          (norm_cdf((dax.hi() - p1) / sd) - norm_cdf((dax.lo - p1) / sd)) *
          (norm_cdf((dax.hi() - p2) / sd) - norm_cdf((dax.lo - p2) / sd));
      const double rn = disc > 1e-300 ? phi_[q] * exact / disc : 0.0;
      for (int j = 0; j < n2; ++j) row[j] *= rn;
    }
    return E;
  };
  // delta "interp" at r = 0: E(0)v = phi(yr) v(eps yr) by bilinear sampling
  auto eval_matrix_zero = [&]() {
    std::vector<double> E(static_cast<std::size_t>(nr_) * n2, 0.0);
    for (int q = 0; q < nr_; ++q) {
      if (phi_[q] == 0.0) continue;
      double* row = &E[static_cast<std::size_t>(q) * n2];
      auto put = [&](double xx, double yy) {
        const double p1 = (xx - dax.lo) / dax.step;
        const double p2 = (yy - dax.lo) / dax.step;
        const int i1 = std::clamp(static_cast<int>(std::floor(p1)), 0, md - 2);
        const int i2 = std::clamp(static_cast<int>(std::floor(p2)), 0, md - 2);
        const double f1 = p1 - i1, f2 = p2 - i2;
        row[i1 * md + i2] += phi_[q] * (1 - f1) * (1 - f2);
        row[i1 * md + i2 + 1] += phi_[q] * (1 - f1) * f2;
        row[(i1 + 1) * md + i2] += phi_[q] * f1 * (1 - f2);
        row[(i1 + 1) * md + i2 + 1] += phi_[q] * f1 * f2;
      };
      put(eps * yr1_[q], eps * yr2_[q]);
    }
    return E;
  };

  std::vector<std::vector<double>> Wm(nu + 1);
  Wm[0] = eval_matrix_zero();
  auto matmat = [&](const std::vector<double>& K, const std::vector<double>& X,
                    std::vector<double>& Y) {
    // Y += K (nr x nr) * X (nr x n2)
    for (int a = 0; a < nr_; ++a) {
      const double* kr = &K[static_cast<std::size_t>(a) * nr_];
      double* yr = &Y[static_cast<std::size_t>(a) * n2];
      for (int b = 0; b < nr_; ++b) {
        const double kab = kr[b];
        if (kab == 0.0) continue;
        const double* xr = &X[static_cast<std::size_t>(b) * n2];
        for (int j = 0; j < n2; ++j) yr[j] += kab * xr[j];
      }
    }
  };
  std::vector<double> rhs, tmp, avg(static_cast<std::size_t>(nr_) * n2);
  for (int i = 1; i <= nu; ++i) {
    rhs = eval_matrix(i * h);
    tmp.assign(static_cast<std::size_t>(nr_) * n2, 0.0);
    for (int j = 1; j < i; ++j) {
      for (std::size_t k = 0; k < avg.size(); ++k)
        avg[k] = 0.5 * (Wm[i - j - 1][k] + Wm[i - j][k]);
      matmat(kbin[j], avg, tmp);
    }
    for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] += beta * tmp[k];
    std::vector<double> Wi = Wm[i - 1];
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < avg.size(); ++k)
        avg[k] = 0.5 * (Wm[i - 1][k] + Wi[k]);
      std::vector<double> upd = rhs;
      tmp.assign(tmp.size(), 0.0);
      matmat(kbin[0], avg, tmp);
      for (std::size_t k = 0; k < upd.size(); ++k) upd[k] += beta * tmp[k];
      Wi = std::move(upd);
    }
    Wm[i] = std::move(Wi);
  }

  // C = beta int dtau0 Spread(tau0) W(t - tau0)
  std::vector<double> gx, gw;
  gauss_legendre_ab(opt_.n_tau0, 0.0, t, gx, gw);
  std::vector<double> C(static_cast<std::size_t>(n2) * n2, 0.0);
  std::vector<double> Wq;
  std::vector<std::vector<double>> Wk(nu + 1);
  for (int k = 0; k < opt_.n_tau0; ++k) {
    const double tau0 = gx[k];
    // interp W matrix at r = t - tau0 (linear between bins)
    const double p = std::clamp((t - tau0) / h, 0.0, static_cast<double>(nu));
    const int i0 = std::min(static_cast<int>(std::floor(p)), nu - 1);
    const double f = p - i0;
    // spread: C[out, .] += beta w sum_q wr phi g(2tau0, dout - eps yq) W[q, .]
    const double tv = 2.0 * tau0;
    for (int d1 = 0; d1 < md; ++d1)
      for (int d2 = 0; d2 < md; ++d2) {
        const int io = d1 * md + d2;
        double* crow = &C[static_cast<std::size_t>(io) * n2];
        for (int q = 0; q < nr_; ++q) {
          if (phi_[q] == 0.0) continue;
          const double g = gauss1d(tv, dax.node(d1) - eps * yr1_[q]) *
                           gauss1d(tv, dax.node(d2) - eps * yr2_[q]);
          const double c = beta * gw[k] * wr_[q] * phi_[q] * g;
          if (c == 0.0) continue;
          const double* w0 = &Wm[i0][static_cast<std::size_t>(q) * n2];
          const double* w1 = &Wm[i0 + 1][static_cast<std::size_t>(q) * n2];
          for (int j = 0; j < n2; ++j)
            crow[j] += c * ((1.0 - f) * w0[j] + f * w1[j]);
        }
      }
  }
  (void)Wk;
  (void)Wq;
  return C;
}

double CollisionEvaluator::opnorm_weighted(double t, double a, bool eps_variant,
                                           const Axis& dax, const Axis& xax,
                                           int iters) const {
  const int md = dax.count, mx = xax.count;
  const int n2 = md * md;
  const std::vector<double> C =
      eps_variant ? collision_matrix_eps(t, dax) : collision_matrix_lim(t, dax);

  // discrete weighted isometry: u = D^{1/2} E v, E = exp(a w), w rotated l1
  std::vector<double> sqw(static_cast<std::size_t>(n2) * mx * mx);
  {
    std::size_t lin = 0;
    for (int d1 = 0; d1 < md; ++d1)
      for (int d2 = 0; d2 < md; ++d2)
        for (int x1 = 0; x1 < mx; ++x1)
          for (int x2 = 0; x2 < mx; ++x2) {
            const double w =
                std::abs(xax.node(x1) + 0.5 * dax.node(d1)) +
                std::abs(xax.node(x1) - 0.5 * dax.node(d1)) +
                std::abs(xax.node(x2) + 0.5 * dax.node(d2)) +
                std::abs(xax.node(x2) - 0.5 * dax.node(d2));
            const double dvol = dax.weight(d1) * dax.weight(d2) *
                                xax.weight(x1) * xax.weight(x2);
            sqw[lin++] = std::sqrt(dvol) * std::exp(a * w);
          }
  }

  const std::size_t N = static_cast<std::size_t>(n2) * mx * mx;
  auto heat_rot = [&](std::vector<double>& v, bool adjoint) {
    GridFunction g;
    g.spec = GridSpec{{dax, dax, xax, xax}};
    g.v = v;
    for (int ax = 0; ax < 4; ++ax) {
      const double var = ax < 2 ? 2.0 * t : 0.5 * t;
      if (adjoint)
        gauss_conv_axis_adjoint(g, ax, var, true);
      else
        gauss_conv_axis(g, ax, var, true);
    }
    v = g.v;
  };

  auto apply_T = [&](const std::vector<double>& vin, bool adjoint) {
    // v -> G_rot v + (C (x) conv_{t/2}) v
    std::vector<double> v = vin;
    // heat part
    std::vector<double> hv = v;
    heat_rot(hv, adjoint);
    // collision part: conv over Xbar then C along Delta slices (they commute)
    GridFunction g;
    g.spec = GridSpec{{dax, dax, xax, xax}};
    g.v = v;
    if (adjoint) {
      gauss_conv_axis_adjoint(g, 2, 0.5 * t, true);
      gauss_conv_axis_adjoint(g, 3, 0.5 * t, true);
    } else {
      gauss_conv_axis(g, 2, 0.5 * t, true);
      gauss_conv_axis(g, 3, 0.5 * t, true);
    }
    std::vector<double> out(N, 0.0);
    const int nx2 = mx * mx;
    for (int xcol = 0; xcol < nx2; ++xcol) {
      // gather the Delta-slice
      std::vector<double> slice(n2), res(n2, 0.0);
      for (int i = 0; i < n2; ++i)
        slice[i] = g.v[static_cast<std::size_t>(i) * nx2 + xcol];
      for (int i = 0; i < n2; ++i) {
        double acc = 0.0;
        if (!adjoint) {
          const double* row = &C[static_cast<std::size_t>(i) * n2];
          for (int j = 0; j < n2; ++j) acc += row[j] * slice[j];
        } else {
          for (int j = 0; j < n2; ++j)
            acc += C[static_cast<std::size_t>(j) * n2 + i] * slice[j];
        }
        res[i] = acc;
      }
      for (int i = 0; i < n2; ++i)
        out[static_cast<std::size_t>(i) * nx2 + xcol] = res[i];
    }
    for (std::size_t i = 0; i < N; ++i) out[i] += hv[i];
    return out;
  };

  // power iteration on S^T S with S = W T W^{-1}, W = diag(sqw)
  std::vector<double> v(N);
  CounterRng rng(20240809u, 7u);
  for (std::size_t i = 0; i < N; ++i) v[i] = rng.normal();
  double sigma = 0.0;
  for (int it = 0; it < iters; ++it) {
    // u = S v : divide, apply T, multiply
    std::vector<double> u = v;
    for (std::size_t i = 0; i < N; ++i) u[i] /= sqw[i];
    u = apply_T(u, false);
    for (std::size_t i = 0; i < N; ++i) u[i] *= sqw[i];
    // w = S^T u
    std::vector<double> w = u;
    for (std::size_t i = 0; i < N; ++i) w[i] *= sqw[i];
    w = apply_T(w, true);
    for (std::size_t i = 0; i < N; ++i) w[i] /= sqw[i];
    double nu_ = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      nu_ += u[i] * u[i];
      nv += v[i] * v[i];
    }
    sigma = std::sqrt(nu_ / nv);
    double nw = 0.0;
    for (std::size_t i = 0; i < N; ++i) nw += w[i] * w[i];
    nw = std::sqrt(nw);
    for (std::size_t i = 0; i < N; ++i) v[i] = w[i] / nw;
  }
  return sigma;
}

CollisionEvaluator::JepsMatrixTable CollisionEvaluator::jeps_matrix_table(
    double umax, int nu) const {
  const double beta = params_.beta_eps;
  const double h = umax / nu;
  std::vector<double> glx, glw;
  gauss_legendre(3, glx, glw);
  std::vector<std::vector<double>> kbin(nu);
  parallel_for(nu, [&](std::size_t j) {
    std::vector<double> acc(static_cast<std::size_t>(nr_) * nr_, 0.0);
    for (int g = 0; g < 3; ++g) {
      const double s = (j + 0.5 + 0.5 * glx[g]) * h;
      const double w = 0.5 * h * glw[g];
      const std::vector<double> K = k_matrix(s);
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += w * K[k];
    }
    kbin[j] = std::move(acc);
  });

  // J(u_i) = beta^2 K(u_i) + beta sum_j Kbin[j] avg(J(u-...)); matrix march
  JepsMatrixTable table;
  table.h = h;
  table.mats.assign(nu + 1,
                    std::vector<double>(static_cast<std::size_t>(nr_) * nr_, 0.0));
  auto matmat_add = [&](const std::vector<double>& A,
                        const std::vector<double>& B, std::vector<double>& Y) {
    for (int a = 0; a < nr_; ++a) {
      const double* ar = &A[static_cast<std::size_t>(a) * nr_];
      double* yrow = &Y[static_cast<std::size_t>(a) * nr_];
      for (int b = 0; b < nr_; ++b) {
        const double v = ar[b];
        if (v == 0.0) continue;
        const double* br = &B[static_cast<std::size_t>(b) * nr_];
        for (int c = 0; c < nr_; ++c) yrow[c] += v * br[c];
      }
    }
  };
  std::vector<double> tmp, avg(static_cast<std::size_t>(nr_) * nr_);
  for (int i = 1; i <= nu; ++i) {
    std::vector<double> rhs = k_matrix(i * h);
    for (double& x : rhs) x *= beta * beta;
    tmp.assign(static_cast<std::size_t>(nr_) * nr_, 0.0);
    for (int j = 1; j < i; ++j) {
      for (std::size_t k = 0; k < avg.size(); ++k)
        avg[k] = 0.5 * (table.mats[i - j - 1][k] + table.mats[i - j][k]);
      matmat_add(kbin[j], avg, tmp);
    }
    for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] += beta * tmp[k];
    std::vector<double> Ji = table.mats[i - 1];
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < avg.size(); ++k)
        avg[k] = 0.5 * (table.mats[i - 1][k] + Ji[k]);
      std::vector<double> upd = rhs;
      tmp.assign(tmp.size(), 0.0);
      matmat_add(kbin[0], avg, tmp);
      for (std::size_t k = 0; k < upd.size(); ++k) upd[k] += beta * tmp[k];
      Ji = std::move(upd);
    }
    table.mats[i] = std::move(Ji);
  }
  return table;
}

double CollisionEvaluator::jeps_opnorm(const JepsMatrixTable& table,
                                       double u) const {
  // interpolate the matrix, balance the folded weights, power-iterate J^T J
  const int nu = static_cast<int>(table.mats.size()) - 1;
  const double p = std::clamp(u / table.h, 1.0, static_cast<double>(nu));
  const int i0 = std::min(static_cast<int>(std::floor(p)), nu - 1);
  const double f = p - i0;
  std::vector<double> J(static_cast<std::size_t>(nr_) * nr_);
  for (std::size_t k = 0; k < J.size(); ++k)
    J[k] = (1.0 - f) * table.mats[i0][k] + f * table.mats[i0 + 1][k];
  // balanced matrix: S = D^{1/2} Jraw D^{1/2} with Jraw = J / w_in; J folded w_b
  std::vector<double> S(J.size());
  for (int a = 0; a < nr_; ++a)
    for (int b = 0; b < nr_; ++b)
      S[static_cast<std::size_t>(a) * nr_ + b] =
          J[static_cast<std::size_t>(a) * nr_ + b] *
          std::sqrt(wr_[a] / wr_[b]);
  std::vector<double> v(nr_), w(nr_);
  CounterRng rng(97531u, 3u);
  for (int i = 0; i < nr_; ++i) v[i] = rng.normal();
  double sigma = 0.0;
  for (int it = 0; it < 60; ++it) {
    // w = S v; v = S^T w / |.|
    std::fill(w.begin(), w.end(), 0.0);
    for (int a = 0; a < nr_; ++a) {
      const double* row = &S[static_cast<std::size_t>(a) * nr_];
      double acc = 0.0;
      for (int b = 0; b < nr_; ++b) acc += row[b] * v[b];
      w[a] = acc;
    }
    std::vector<double> z(nr_, 0.0);
    for (int a = 0; a < nr_; ++a) {
      const double* row = &S[static_cast<std::size_t>(a) * nr_];
      for (int b = 0; b < nr_; ++b) z[b] += row[b] * w[a];
    }
    double nv = 0.0, nz = 0.0;
    for (int i = 0; i < nr_; ++i) {
      nv += v[i] * v[i];
      nz += z[i] * z[i];
    }
    sigma = std::sqrt(std::sqrt(nz / nv));  // (|S^T S v| / |v|)^{1/2}
    nz = std::sqrt(nz);
    for (int i = 0; i < nr_; ++i) v[i] = z[i] / nz;
  }
  return sigma;
}

}  // namespace dbose
