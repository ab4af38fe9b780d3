#include "dbose/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dbose/errors.hpp"
#include "dbose/parallel.hpp"
#include "dbose/quadrature.hpp"

namespace dbose {

double ln_gamma(double u) {
  if (!(u > 0.0)) throw std::domain_error("ln_gamma: u <= 0");
  return std::lgamma(u);
}

namespace {

// integrand of j: t^{u-1} e^{theta u} / Gamma(u), evaluated in log space
inline double j_integrand(double u, double log_t, double theta) {
  if (u <= 0.0) return 0.0;
  const double e = (u - 1.0) * log_t + theta * u - std::lgamma(u);
  return e > -745.0 ? std::exp(e) : 0.0;
}

}  // namespace

JResult volterra_j(double t, double theta) {
  if (!(t > 0.0)) throw std::domain_error("volterra_j: t <= 0");
  if (t < 1e-30) {
    // deep asymptotic regime: j ~ t^{-1} L^{-2} (1 + 2(g+th)/L + 6 c2 /L^2)
    const double L = -std::log(t);
    const double g = kEulerGamma;
    const double c2 = g * g / 2.0 - M_PI * M_PI / 12.0 + g * theta +
                      0.5 * theta * theta;
    const double corr = 1.0 + 2.0 * (g + theta) / L + 6.0 * c2 / (L * L);
    return {corr / (t * L * L), 1e-5};
  }
  const double log_t = std::log(t);
  auto f = [&](double u) { return j_integrand(u, log_t, theta); };
  // head: u in (0, 1], endpoint has unbounded u-derivatives for t < 1
  const QuadResult head = integrate_tanh_sinh(f, 0.0, 1.0, 1e-12);
  // tail: [1, U] with U past the superexponential decay of 1/Gamma
  double U = 2.0;
  const double ref = std::max(head.value, f(1.0));
  while (U < 1e5 && f(U) > 1e-20 * std::max(ref, 1e-300)) U *= 1.5;
  const QuadResult tail = integrate_gk(f, 1.0, U, 1e-12);
  const double value = head.value + tail.value;
  const double rel = (head.abs_err + tail.abs_err) / std::max(value, 1e-300);
  if (!(value > 0.0) || rel > 1e-8)
    throw accuracy_error("volterra_j: quadrature did not converge", rel);
  return {value, rel};
}

JTable::JTable(double theta, double tmin, double tmax, int nodes)
    : theta_(theta),
      log_tmin_(std::log(tmin)),
      log_tmax_(std::log(tmax)),
      dlog_((std::log(tmax) - std::log(tmin)) / (nodes - 1)) {
  // two guard nodes past each end keep the cubic stencil two-sided
  const int total = nodes + 4;
  std::vector<double> vals(total);
  parallel_for(total, [&](std::size_t i) {
    const double t =
        std::exp(log_tmin_ + (static_cast<int>(i) - 2) * dlog_);
    vals[i] = std::log(volterra_j(t, theta).value);
  });
  log_j_ = std::move(vals);
}

double JTable::operator()(double t) const {
  const double lt = std::log(t);
  if (lt < log_tmin_ || lt > log_tmax_) return direct(t);
  const double p = (lt - log_tmin_) / dlog_ + 2.0;  // guard offset
  int i0 = static_cast<int>(std::floor(p));
  const int n = static_cast<int>(log_j_.size());
  if (i0 > n - 3) i0 = n - 3;
  const double s = p - i0;
  auto at = [&](int i) { return log_j_[std::clamp(i, 0, n - 1)]; };
  // Catmull-Rom in (log t, log j)
  const double a0 = at(i0 - 1), a1 = at(i0), a2 = at(i0 + 1), a3 = at(i0 + 2);
  const double s2 = s * s, s3 = s2 * s;
  const double v = 0.5 * ((2.0 * a1) + (-a0 + a2) * s +
                          (2.0 * a0 - 5.0 * a1 + 4.0 * a2 - a3) * s2 +
                          (-a0 + 3.0 * a1 - 3.0 * a2 + a3) * s3);
  return std::exp(v);
}

double d_lambda(double lam) {
  if (lam < 0.0) throw std::domain_error("d_lambda: lambda < 0 (use d_boundary)");
  auto f = [&](double s) {
    return std::exp(-s) * std::log(std::sqrt(s) + std::sqrt(s + lam));
  };
  const QuadResult head = integrate_tanh_sinh(f, 0.0, 1.0, 1e-12);
  const QuadResult tail = integrate_gk(f, 1.0, 60.0, 1e-12);
  return 2.0 * (head.value + tail.value);
}

double d_lambda_deriv(double mu) {
  if (!(mu > 0.0)) throw std::domain_error("d_lambda_deriv: mu <= 0");
  auto f = [&](double s) {
    const double a = std::sqrt(s + mu);
    return std::exp(-s) / (a * (std::sqrt(s) + a));
  };
  const QuadResult head = integrate_tanh_sinh(f, 0.0, 1.0, 1e-11);
  const QuadResult tail = integrate_gk(f, 1.0, 60.0, 1e-11);
  return head.value + tail.value;
}

BoundaryValue d_boundary(double x) {
  if (!(x > 0.0)) throw std::domain_error("d_boundary: x <= 0");
  // Re: |sqrt(s) + i sqrt(x-s)|^2 = x exactly for s < x, so that stretch
  // contributes log(x)/2 * mass; the rest is the smooth tail from s = x.
  double re = std::log(x) * (x > 700.0 ? 1.0 : 1.0 - std::exp(-x));
  auto ftail = [&](double s) {
    return std::exp(-s) * std::log(std::sqrt(s) + std::sqrt(std::max(s - x, 0.0)));
  };
  if (x < 700.0) {
    const QuadResult tail = integrate_tanh_sinh(ftail, x, x + 60.0, 1e-11);
    re += 2.0 * tail.value;
  }
  auto fim = [&](double s) {
    if (s <= 0.0 || s >= x) return 0.0;
    return std::exp(-s) * std::atan2(std::sqrt(x - s), std::sqrt(s));
  };
  const double imax = std::min(x, 60.0);
  const QuadResult qi = integrate_tanh_sinh(fim, 0.0, imax, 1e-11);
  return {re, 2.0 * qi.value};
}

ScalarParams ScalarParams::make(double theta, double eps,
                                const MollifierHandle& h,
                                double c0_precomputed) {
  if (!(eps > 0.0 && eps < 1.0))
    throw std::domain_error("ScalarParams: eps must be in (0, 1)");
  ScalarParams p;
  p.theta = theta;
  p.eps = eps;
  p.beta_eps = dbose::beta_eps(eps, theta, h);
  if (!(p.beta_eps > 0.0))
    throw std::domain_error("ScalarParams: beta_eps <= 0 at this eps");
  p.c0 = c0_precomputed > 0.0 ? c0_precomputed : fit_c0(h);
  p.c1 = std::exp(kEulerGamma + d_lambda(0.0) + 1.0);
  p.eta_eps = 2.0 * std::abs(std::log(eps)) - std::log(p.c0) -
              4.0 * M_PI / p.beta_eps;
  return p;
}

double c_eps(double lam, const ScalarParams& p, CepsMode mode) {
  if (!(lam > 0.0)) throw std::domain_error("c_eps: lambda <= 0");
  if (mode == CepsMode::closed) {
    return 1.0 - p.beta_eps / (4.0 * M_PI) *
                     (std::log(lam) - p.eta_eps - d_lambda(p.q() * lam));
  }
  // s = w^2 removes the endpoint singularity
  const double q = p.q();
  auto f = [&](double w) { return std::exp(-lam * w * w) / std::sqrt(w * w + q); };
  const double wmax = 30.0 / std::sqrt(lam);
  const QuadResult r = integrate_gk(f, 0.0, wmax, 1e-12);
  return p.beta_eps / (2.0 * M_PI) * r.value;
}

// ---------------- b(u) and c0 ----------------

namespace {

// radial autocorrelation A(r) = int Phi(y) Phi(y - r e1) dy, tabulated once
// per (radial) mollifier; valid for the standard bump.
class RadialAutocorr {
 public:
  explicit RadialAutocorr(const MollifierHandle& h) : R_(h.support_radius()) {
    constexpr int kNodes = 320, kQ = 72;
    std::vector<double> gx, gw;
    gauss_legendre_ab(kQ, -R_, R_, gx, gw);
    rmax_ = 2.0 * R_;
    dr_ = rmax_ / (kNodes - 1);
    vals_.resize(kNodes);
    parallel_for(kNodes, [&](std::size_t k) {
      const double r = k * dr_;
      double acc = 0.0;
      for (int i = 0; i < kQ; ++i)
        for (int j = 0; j < kQ; ++j) {
          const double p = h.eval(gx[i], gx[j]);
          if (p == 0.0) continue;
          acc += gw[i] * gw[j] * p * h.eval(gx[i] - r, gx[j]);
        }
      vals_[k] = acc;
    });
  }

  double operator()(double r) const {
    if (r < 0.0 || r >= rmax_) return 0.0;
    const double p = r / dr_;
    int i0 = static_cast<int>(std::floor(p));
    const int n = static_cast<int>(vals_.size());
    if (i0 > n - 2) i0 = n - 2;
    const double s = p - i0;
    auto at = [&](int i) { return vals_[std::clamp(i, 0, n - 1)]; };
    const double a0 = at(i0 - 1), a1 = at(i0), a2 = at(i0 + 1), a3 = at(i0 + 2);
    const double s2 = s * s, s3 = s2 * s;
    return 0.5 * ((2.0 * a1) + (-a0 + a2) * s +
                  (2.0 * a0 - 5.0 * a1 + 4.0 * a2 - a3) * s2 +
                  (-a0 + 3.0 * a1 - 3.0 * a2 + a3) * s3);
  }

  double rmax() const { return rmax_; }

 private:
  double R_, rmax_, dr_;
  std::vector<double> vals_;
};

const RadialAutocorr& bump_autocorr(const MollifierHandle& h) {
  static const RadialAutocorr table(MollifierHandle::standard_bump());
  (void)h;
  return table;
}

// direct tensor-product evaluation with u-adapted resolution (any profile)
double b_overlap_tensor(double u, const MollifierHandle& h) {
  const double R = h.support_radius();
  const int m = std::min(200, static_cast<int>(48 + 2.4 * std::sqrt(std::max(u, 1.0)) * R));
  std::vector<double> gx, gw;
  gauss_legendre_ab(m, -R, R, gx, gw);
  // C[i][j] = w_i w_j Phi(x_i, x_j);  E[i][k] = exp(-u (x_i - x_k)^2 / 4)
  std::vector<double> C(m * m), E(m * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      C[i * m + j] = gw[i] * gw[j] * h.eval(gx[i], gx[j]);
      const double d = gx[i] - gx[j];
      E[i * m + j] = std::exp(-u * d * d / 4.0);
    }
  // b = sum_{k1,l1} E[k1,l1] (C E C^T)[k1,l1]
  std::vector<double> T(m * m, 0.0), M(m * m, 0.0);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < m; ++k) {
      const double c = C[i * m + k];
      if (c == 0.0) continue;
      const double* Er = &E[k * m];
      double* Tr = &T[i * m];
      for (int l = 0; l < m; ++l) Tr[l] += c * Er[l];
    }
  for (int i = 0; i < m; ++i)
    for (int l = 0; l < m; ++l) {
      const double t = T[i * m + l];
      if (t == 0.0) continue;
      const double* Cr = &C[l * m];
      double* Mr = &M[i * m];
      for (int j = 0; j < m; ++j) Mr[j] += t * Cr[j];
    }
  double b = 0.0;
  for (int i = 0; i < m * m; ++i) b += E[i] * M[i];
  return b;
}

}  // namespace

double b_overlap(double u, const MollifierHandle& phi2) {
  if (u < 0.0) throw std::domain_error("b_overlap: u < 0");
  if (u == 0.0) return 1.0 * 1.0;  // normalization squared (audited in tests)
  if (phi2.profile() == MollifierProfile::standard_bump) {
    const RadialAutocorr& A = bump_autocorr(phi2);
    const double rmax = std::min(A.rmax(), 14.0 / std::sqrt(u) + 1e-3);
    auto f = [&](double r) { return A(r) * std::exp(-u * r * r / 4.0) * r; };
    const QuadResult q = integrate_gk(f, 0.0, rmax, 1e-10);
    return 2.0 * M_PI * q.value;
  }
  return b_overlap_tensor(u, phi2);
}

double fit_c0(const MollifierHandle& phi2) {
  constexpr double kUmin = 1e-4;
  auto build_grid = [](int lin, int geo) {
    std::vector<double> us;
    for (int i = 0; i <= lin; ++i)
      us.push_back(kUmin + (2.0 - kUmin) * i / lin);
    const double lo = std::log(2.0), hi = std::log(1e4);
    for (int i = 1; i <= geo; ++i)
      us.push_back(std::exp(lo + (hi - lo) * i / geo));
    return us;
  };
  auto min_h = [&](const std::vector<double>& us) {
    std::vector<double> hs(us.size());
    parallel_for(us.size(), [&](std::size_t i) {
      const double b = b_overlap(us[i], phi2);
      hs[i] = (1.0 / b - 1.0) / us[i];
    });
    return *std::min_element(hs.begin(), hs.end());
  };
  const double tail_limit = 1.0 / (4.0 * M_PI * phi2.phi_sq_integral());
  // the shave absorbs the sub-grid dip of h(u) between fit nodes
  const double c0 =
      std::min(min_h(build_grid(400, 240)), tail_limit) * (1.0 - 2e-5);
  // post-fit audit on a 10x denser grid
  const auto audit = build_grid(4000, 2400);
  std::vector<char> bad(audit.size(), 0);
  parallel_for(audit.size(), [&](std::size_t i) {
    const double b = b_overlap(audit[i], phi2);
    if (b * (1.0 + c0 * audit[i]) > 1.0 + 1e-10) bad[i] = 1;
  });
  for (char c : bad)
    if (c) throw fitting_error("fit_c0: audit failed (grid too coarse)");
  return c0;
}

// ---------------- B_eps ----------------

namespace {

// k(s) = beta / (4 pi sqrt(s^2 + q s)) and its antiderivative
inline double k_factor(double s, double beta, double q) {
  return beta / (4.0 * M_PI * std::sqrt(s * s + q * s));
}
inline double k_cumulative(double R, double beta, double q) {
  return beta / (2.0 * M_PI) *
         std::log((std::sqrt(R) + std::sqrt(R + q)) / std::sqrt(q));
}
// inverse of K(x) = u * K(R)
inline double k_inverse(double target, double beta, double q) {
  const double y = std::sqrt(q) * std::exp(2.0 * M_PI * target / beta);
  const double num = y * y - q;
  return num * num / (4.0 * y * y);
}

// g2(R) = int_0^R k(s) k(R-s) ds, tabulated in log-log
class TwoFactorTable {
 public:
  TwoFactorTable(double t, double beta, double q) {
    constexpr int kNodes = 240;
    lo_ = std::log(t * 1e-8);
    hi_ = std::log(t);
    d_ = (hi_ - lo_) / (kNodes - 1);
    vals_.resize(kNodes);
    parallel_for(kNodes, [&](std::size_t i) {
      const double R = std::exp(lo_ + i * d_);
      // s = w^2: 2 int_0^{sqrt(R/2)} k(w^2) k(R - w^2) 2 w dw
      auto f = [&](double w) {
        const double s = w * w;
        return 2.0 * w * k_factor(s, beta, q) * k_factor(R - s, beta, q);
      };
      const QuadResult r = integrate_gk(f, 0.0, std::sqrt(R / 2.0), 1e-9);
      vals_[i] = std::log(2.0 * r.value);
    });
  }

  double operator()(double R) const {
    const double lr = std::log(R);
    const double p = std::clamp((lr - lo_) / d_, 0.0, vals_.size() - 1.0);
    int i0 = static_cast<int>(std::floor(p));
    const int n = static_cast<int>(vals_.size());
    if (i0 > n - 2) i0 = n - 2;
    const double s = p - i0;
    auto at = [&](int i) { return vals_[std::clamp(i, 0, n - 1)]; };
    const double a0 = at(i0 - 1), a1 = at(i0), a2 = at(i0 + 1), a3 = at(i0 + 2);
    const double s2 = s * s, s3 = s2 * s;
    return std::exp(0.5 * ((2.0 * a1) + (-a0 + a2) * s +
                           (2.0 * a0 - 5.0 * a1 + 4.0 * a2 - a3) * s2 +
                           (-a0 + 3.0 * a1 - 3.0 * a2 + a3) * s3));
  }

 private:
  double lo_, hi_, d_;
  std::vector<double> vals_;
};

}  // namespace

BepsSeriesResult b_eps_series(double t, const ScalarParams& p, int lmax,
                              int nsamples, std::uint64_t seed) {
  if (!(t > 0.0)) throw std::domain_error("b_eps_series: t <= 0");
  if (lmax < 1) throw std::domain_error("b_eps_series: lmax < 1");
  const double beta = p.beta_eps, q = p.q();
  const TwoFactorTable g2(t, beta, q);

  BepsSeriesResult out;
  out.estimate.seed = seed;
  out.estimate.nsamples = nsamples;
  double total = 0.0, var = 0.0;
  for (int l = 1; l <= lmax; ++l) {
    double mean = 0.0, se = 0.0;
    if (l == 1) {
      mean = beta * k_factor(t, beta, q);
    } else if (l == 2) {
      mean = beta * g2(t);
    } else {
      // sample l-2 slots from the exact conditional density k/K(R); the last
      // two slots are integrated exactly through g2. Weights behave like
      // prod tau^{-1/2} near the endpoints.
      constexpr int kBlock = 2048;
      const int nblocks = (nsamples + kBlock - 1) / kBlock;
      std::vector<double> bs(nblocks, 0.0), bs2(nblocks, 0.0);
      std::vector<std::int64_t> bc(nblocks, 0);
      parallel_for(nblocks, [&](std::size_t b) {
        CounterRng rng(seed, (static_cast<std::uint64_t>(l) << 32) | b);
        const int n0 = static_cast<int>(b) * kBlock;
        const int n1 = std::min(nsamples, n0 + kBlock);
        for (int s = n0; s < n1; ++s) {
          double R = t, w = 1.0;
          for (int kk = 0; kk < l - 2; ++kk) {
            const double Z = k_cumulative(R, beta, q);
            const double tau =
                std::min(R, k_inverse(rng.uniform() * Z, beta, q));
            w *= Z;
            R -= tau;
            if (R < t * 1e-10) R = t * 1e-10;
          }
          const double x = w * g2(R);
          bs[b] += x;
          bs2[b] += x * x;
        }
        bc[b] = n1 - n0;
      });
      double s1 = 0.0, s2 = 0.0;
      std::int64_t n = 0;
      for (int b = 0; b < nblocks; ++b) {
        s1 += bs[b];
        s2 += bs2[b];
        n += bc[b];
      }
      mean = beta * s1 / n;
      const double v = std::max(0.0, s2 / n - (s1 / n) * (s1 / n));
      se = beta * std::sqrt(v / n);
    }
    out.term_means.push_back(mean);
    out.term_stderrs.push_back(se);
    total += mean;
    var += se * se;
    // stop once well past the peak and the terms are negligible
    const int lpk = static_cast<int>(
        std::max_element(out.term_means.begin(), out.term_means.end()) -
        out.term_means.begin());
    if (l > lpk + 3 && mean < 1e-5 * total) break;
  }
  const int nt = static_cast<int>(out.term_means.size());
  if (nt >= 2 && nt == lmax &&
      out.term_means[nt - 1] > out.term_means[nt - 2]) {
    throw truncation_error("b_eps_series: terms not decaying at lmax");
  }
  // geometric tail from the last ratios
  if (nt >= 4) {
    double r = 0.0;
    int cnt = 0;
    for (int k = nt - 3; k < nt; ++k)
      if (out.term_means[k - 1] > 0.0) {
        r += out.term_means[k] / out.term_means[k - 1];
        ++cnt;
      }
    r = cnt ? r / cnt : 0.0;
    if (r > 0.0 && r < 0.999)
      out.truncation_tail = out.term_means[nt - 1] * r / (1.0 - r);
  }
  out.estimate.mean = total;
  out.estimate.stderr_ = std::sqrt(var);
  return out;
}

double lambda_star(const ScalarParams& p) {
  const double q = p.q();
  auto psi = [&](double lam) {
    return std::log(lam) - p.eta_eps - d_lambda(q * lam);
  };
  if (!(psi(p.c1) > 0.0))
    throw pole_error("lambda_star: C_eps(c1) >= 1; eps not small enough");
  double lo = p.c1;
  while (psi(lo) > 0.0) {
    lo *= 0.25;
    if (lo < 1e-300) throw pole_error("lambda_star: no sign change found");
  }
  double hi = std::min(p.c1, lo * 4.0);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (psi(mid) > 0.0)
      hi = mid;
    else
      lo = mid;
    if (hi - lo < 1e-14 * hi) break;
  }
  return 0.5 * (lo + hi);
}

double c2_constant(const ScalarParams& p) {
  // smallest c2 with log(|x|/c2) - log_+(q x) <= F_eps(x) on an audit grid
  const double q = p.q();
  double best = 0.0;
  bool ok = true;
  for (int i = 0; i <= 120; ++i) {
    const double x = std::exp(std::log(1e-6) + i * (std::log(1e8) - std::log(1e-6)) / 120.0);
    const BoundaryValue d = d_boundary(q * x);
    const double F = std::log(x) - p.eta_eps - d.re;
    const double lp = std::max(std::log(std::max(q * x, 1e-300)), 0.0);
    const double need = std::log(x) - lp - F;  // log c2 must be >= this
    if (!std::isfinite(need)) {
      ok = false;
      break;
    }
    best = std::max(best, need);
  }
  if (!ok) return std::exp(std::abs(p.eta_eps) + 1.0);
  return std::max(1.0, std::exp(best));
}

double b_eps_contour(double t, const ScalarParams& p) {
  if (!(t > 0.0)) throw std::domain_error("b_eps_contour: t <= 0");
  const double q = p.q();
  // pole residue at lambda*
  const double ls = lambda_star(p);
  const double psip = 1.0 / ls - q * d_lambda_deriv(q * ls);
  const double residue = 4.0 * M_PI * std::exp(ls * t) / psip;

  auto integrand = [&](double x) {
    if (x <= 0.0) return 0.0;
    const BoundaryValue d = d_boundary(q * x);
    const double F = std::log(x) - p.eta_eps - d.re;
    const double G = M_PI - d.im;
    const double den = F * F + G * G;
    if (den == 0.0)
      throw pole_error("b_eps_contour: F^2 + G^2 = 0 on the contour");
    return std::exp(-t * x) * 4.0 * G / den;
  };
  const double c2 = c2_constant(p);
  const double xmax = 80.0 / t + 10.0 / q;
  std::vector<double> splits = {0.0, c2 * std::exp(3.0), 1.0 / t, 1.0 / q, xmax};
  for (double& s : splits) s = std::min(s, xmax);
  std::sort(splits.begin(), splits.end());
  splits.erase(std::unique(splits.begin(), splits.end()), splits.end());
  double cut = 0.0;
  for (std::size_t k = 0; k + 1 < splits.size(); ++k)
    cut += integrate_gk(integrand, splits[k], splits[k + 1], 1e-9).value;
  return residue + cut;
}

}  // namespace dbose
