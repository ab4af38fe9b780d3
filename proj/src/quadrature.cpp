#include "dbose/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dbose {

namespace {

// Gauss-Kronrod 7-15 nodes/weights (symmetric half, node 0 included last).
const double kXgk[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
const double kWgk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
const double kWg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct GkEstimate {
  double value;
  double err;
};

GkEstimate gk15(const Integrand& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double fv[15];
  for (int i = 0; i < 7; ++i) {
    fv[i] = f(c - h * kXgk[i]);
    fv[14 - i] = f(c + h * kXgk[i]);
  }
  fv[7] = f(c);
  double resk = kWgk[7] * fv[7];
  double resg = kWg[3] * fv[7];
  for (int i = 0; i < 7; ++i) {
    resk += kWgk[i] * (fv[i] + fv[14 - i]);
    if (i % 2 == 1) resg += kWg[i / 2] * (fv[i] + fv[14 - i]);
  }
  const double value = resk * h;
  const double err = std::abs((resk - resg) * h);
  return {value, err};
}

void gk_adaptive(const Integrand& f, double a, double b, double tol, int depth,
                 int max_depth, QuadResult& out) {
  GkEstimate e = gk15(f, a, b);
  out.evals += 15;
  if (depth >= max_depth || e.err <= tol || b - a < 1e-15 * (std::abs(a) + 1.0)) {
    out.value += e.value;
    out.abs_err += e.err;
    return;
  }
  const double c = 0.5 * (a + b);
  gk_adaptive(f, a, c, 0.5 * tol, depth + 1, max_depth, out);
  gk_adaptive(f, c, b, 0.5 * tol, depth + 1, max_depth, out);
}

}  // namespace

QuadResult integrate_gk(const Integrand& f, double a, double b,
                        double rel_tol, double abs_tol, int max_depth) {
  if (a == b) return {0.0, 0.0, 0};
  GkEstimate first = gk15(f, a, b);
  double tol = std::max(abs_tol, rel_tol * std::abs(first.value));
  if (tol == 0.0) tol = 1e-300;
  QuadResult out;
  gk_adaptive(f, a, b, tol, 0, max_depth, out);
  return out;
}

QuadResult integrate_tanh_sinh(const Integrand& f, double a, double b,
                               double rel_tol, int max_level) {
  // x = c + h tanh(pi/2 sinh(u)); nodes are addressed by their distance to the
  // endpoint, dist = 2/(e^{2 sh} + 1), which stays accurate near the ends.
  const double c = 0.5 * (a + b);
  const double hw = 0.5 * (b - a);
  const double umax = 4.3;
  QuadResult out;
  auto add_node = [&](double u, double& sum) {
    const double sh = 0.5 * M_PI * std::sinh(u);
    const double w =
        0.5 * M_PI * std::cosh(u) / (std::cosh(sh) * std::cosh(sh));
    const double dist = 2.0 / (std::exp(2.0 * sh) + 1.0);  // 1 - tanh(sh)
    if (hw * dist <= 0.0) return;
    sum += w * (f(b - hw * dist) + f(a + hw * dist));
    out.evals += 2;
  };
  double h = 1.0;
  double sum = 0.5 * M_PI * f(c);
  out.evals = 1;
  for (int k = 1; k * h <= umax; ++k) add_node(k * h, sum);
  double prev = sum * h * hw;
  for (int level = 1; level <= max_level; ++level) {
    h *= 0.5;
    for (int k = 1; k * h <= umax; k += 2) add_node(k * h, sum);
    const double cur = sum * h * hw;
    const double err = std::abs(cur - prev);
    prev = cur;
    if (level >= 3 && err <= rel_tol * std::abs(cur) + 1e-305) {
      out.value = cur;
      out.abs_err = err;
      return out;
    }
  }
  out.value = prev;
  out.abs_err = std::abs(prev) * 1e-8;
  return out;
}

QuadResult integrate_to_inf(const Integrand& f, double a, double rel_tol) {
  auto g = [&](double u) {
    const double d = 1.0 - u;
    const double x = a + u / d;
    return f(x) / (d * d);
  };
  return integrate_gk(g, 0.0, 1.0, rel_tol, 0.0, 48);
}

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) throw std::domain_error("gauss_legendre: n < 1");
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

void gauss_legendre_ab(int n, double a, double b,
                       std::vector<double>& x, std::vector<double>& w) {
  gauss_legendre(n, x, w);
  for (int i = 0; i < n; ++i) {
    x[i] = 0.5 * (b - a) * x[i] + 0.5 * (a + b);
    w[i] *= 0.5 * (b - a);
  }
}

}  // namespace dbose
