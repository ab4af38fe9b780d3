#include "dbose/quadrature_mc.hpp"

#include <cmath>
#include <stdexcept>

#include "dbose/errors.hpp"
#include "dbose/parallel.hpp"

namespace dbose {

SimplexSample simplex_sample(int l, double t, SimplexProfile profile,
                             CounterRng& rng) {
  if (l < 1) throw std::domain_error("simplex_sample: l < 1");
  SimplexSample s;
  s.point.t = t;
  s.point.taus.assign(l, 0.0);
  if (l == 1) {
    s.point.taus[0] = t;
    s.weight = 1.0;
    return s;
  }
  double sum = 0.0;
  for (int k = 0; k < l; ++k) {
    const double g = (profile == SimplexProfile::uniform)
                         ? -std::log(rng.uniform_pos())
                         : rng.gamma_half();
    s.point.taus[k] = g;
    sum += g;
  }
  double prod_sqrt = 1.0;
  for (int k = 0; k < l; ++k) {
    s.point.taus[k] *= t / sum;
    if (profile == SimplexProfile::halfpow)
      prod_sqrt *= std::sqrt(s.point.taus[k]);
  }
  if (profile == SimplexProfile::uniform) {
    s.weight = std::exp((l - 1) * std::log(t) - std::lgamma(l));  // volume
  } else {
    // 1/density of the t-scaled Dirichlet(1/2,...,1/2)
    s.weight = std::exp(0.5 * l * std::log(M_PI) - std::lgamma(0.5 * l) +
                        (0.5 * l - 1.0) * std::log(t)) *
               prod_sqrt;
  }
  return s;
}

double dirichlet_closed_form(int l, double t) {
  if (l < 1) throw std::domain_error("dirichlet_closed_form: l < 1");
  return std::exp((0.5 * l - 1.0) * std::log(t) + 0.5 * l * std::log(M_PI) -
                  std::lgamma(0.5 * l));
}

MCEstimate simplex_integrate(
    const std::function<double(const SimplexPoint&)>& f, int l, double t,
    SimplexProfile profile, int nsamples, std::uint64_t seed) {
  if (nsamples < 1) throw std::domain_error("simplex_integrate: nsamples < 1");
  constexpr int kBlock = 4096;
  const int nblocks = (nsamples + kBlock - 1) / kBlock;
  std::vector<double> bsum(nblocks, 0.0), bsum2(nblocks, 0.0);
  std::vector<std::int64_t> bcnt(nblocks, 0);
  std::vector<char> bad(nblocks, 0);
  parallel_for(nblocks, [&](std::size_t b) {
    CounterRng rng(seed, b);
    const int n0 = static_cast<int>(b) * kBlock;
    const int n1 = std::min(nsamples, n0 + kBlock);
    double s1 = 0.0, s2 = 0.0;
    for (int i = n0; i < n1; ++i) {
      const SimplexSample s = simplex_sample(l, t, profile, rng);
      const double x = f(s.point) * s.weight;
      if (!std::isfinite(x)) {
        bad[b] = 1;
        return;
      }
      s1 += x;
      s2 += x * x;
    }
    bsum[b] = s1;
    bsum2[b] = s2;
    bcnt[b] = n1 - n0;
  });
  double s1 = 0.0, s2 = 0.0;
  std::int64_t n = 0;
  for (int b = 0; b < nblocks; ++b) {
    if (bad[b])
      throw degenerate_estimate_error("simplex_integrate: non-finite sample");
    s1 += bsum[b];
    s2 += bsum2[b];
    n += bcnt[b];
  }
  if (s1 == 0.0 && s2 == 0.0)
    throw degenerate_estimate_error("simplex_integrate: all samples zero");
  MCEstimate e;
  e.mean = s1 / n;
  const double var = std::max(0.0, s2 / n - e.mean * e.mean);
  e.stderr_ = std::sqrt(var / n);
  e.nsamples = n;
  e.seed = seed;
  return e;
}

PathBundle brownian_sample(const XPoint& x, double t, double dt,
                           CounterRng& rng) {
  if (dt <= 0.0) throw std::domain_error("brownian_sample: dt <= 0");
  const int nsteps = static_cast<int>(std::lround(t / dt));
  if (nsteps < 1 || std::abs(nsteps * dt - t) > 1e-9 * t)
    throw std::domain_error("brownian_sample: dt does not divide t");
  PathBundle pb;
  pb.t = t;
  pb.dt = dt;
  pb.start = x;
  pb.paths.assign(x.size(), std::vector<Vec2>(nsteps + 1));
  const double sd = std::sqrt(dt);
  for (std::size_t p = 0; p < x.size(); ++p) {
    pb.paths[p][0] = x[p];
    for (int k = 1; k <= nsteps; ++k) {
      pb.paths[p][k].x = pb.paths[p][k - 1].x + sd * rng.normal();
      pb.paths[p][k].y = pb.paths[p][k - 1].y + sd * rng.normal();
    }
  }
  return pb;
}

FeynmanKacResult feynman_kac_estimate(
    const std::function<double(const XPoint&)>& f, const XPoint& x, double t,
    double eps, double dt, int nsamples, const MollifierHandle& h, double theta,
    std::uint64_t seed, std::optional<double> beta_override) {
  if (dt > eps * eps / 4.0)
    throw resolution_error("feynman_kac_estimate: dt > eps^2/4");
  const int nsteps = static_cast<int>(std::lround(t / dt));
  if (nsteps < 1) throw std::domain_error("feynman_kac_estimate: t/dt < 1");
  const double dt_eff = t / nsteps;
  const double beta = beta_override ? *beta_override : beta_eps(eps, theta, h);
  const int n = static_cast<int>(x.size());
  const auto pairs = enumerate_pairs(n);

  constexpr int kBlock = 1024;
  const int nblocks = (nsamples + kBlock - 1) / kBlock;
  std::vector<double> bsum(nblocks, 0.0), bsum2(nblocks, 0.0);
  std::vector<std::int64_t> bcnt(nblocks, 0), bclamp(nblocks, 0);

  parallel_for(nblocks, [&](std::size_t b) {
    CounterRng rng(seed, b);
    const int n0 = static_cast<int>(b) * kBlock;
    const int n1 = std::min(nsamples, n0 + kBlock);
    XPoint pos(n);
    const double sd = std::sqrt(dt_eff);
    for (int s = n0; s < n1; ++s) {
      pos = x;
      auto potential = [&]() {
        double v = 0.0;
        for (const auto& a : pairs)
          v += h.eval(pos[a.i - 1].x - pos[a.j - 1].x,
                      pos[a.i - 1].y - pos[a.j - 1].y, eps);
        return v;
      };
      double integral = 0.5 * potential();
      for (int k = 1; k <= nsteps; ++k) {
        for (int p = 0; p < n; ++p) {
          pos[p].x += sd * rng.normal();
          pos[p].y += sd * rng.normal();
        }
        integral += (k == nsteps ? 0.5 : 1.0) * potential();
      }
      integral *= dt_eff;
      double expo = beta * integral;
      if (expo > 700.0) {
        expo = 700.0;
        ++bclamp[b];
      }
      const double val = std::exp(expo) * f(pos);
      bsum[b] += val;
      bsum2[b] += val * val;
    }
    bcnt[b] = n1 - n0;
  });

  double s1 = 0.0, s2 = 0.0;
  std::int64_t cnt = 0, clamped = 0;
  for (int b = 0; b < nblocks; ++b) {
    s1 += bsum[b];
    s2 += bsum2[b];
    cnt += bcnt[b];
    clamped += bclamp[b];
  }
  FeynmanKacResult r;
  r.estimate.mean = s1 / cnt;
  const double var = std::max(0.0, s2 / cnt - r.estimate.mean * r.estimate.mean);
  r.estimate.stderr_ = std::sqrt(var / cnt);
  r.estimate.nsamples = cnt;
  r.estimate.seed = seed;
  r.clamped = clamped;
  r.valid = clamped <= cnt / 1000;
  return r;
}

}  // namespace dbose
