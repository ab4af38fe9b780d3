#include "dbose/mollifier.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dbose/quadrature.hpp"

namespace dbose {

namespace {

inline double bump_raw(double r2) {
  return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0;
}

double bump_normalization() {
  // int Phi = C * 2 pi int_0^1 e^{-1/(1-r^2)} r dr = 1
  static const double c = [] {
    auto f = [](double r) { return bump_raw(r * r) * r; };
    const QuadResult q = integrate_tanh_sinh(f, 0.0, 1.0, 1e-14);
    return 1.0 / (2.0 * M_PI * q.value);
  }();
  return c;
}

}  // namespace

MollifierHandle MollifierHandle::standard_bump() {
  MollifierHandle h;
  h.profile_ = MollifierProfile::standard_bump;
  h.normalization_ = bump_normalization();
  h.support_radius_ = 1.0;
  return h;
}

MollifierHandle MollifierHandle::from_table(const GridFunction& table) {
  if (table.spec.axes.size() != 2)
    throw std::invalid_argument("mollifier table must be 2-d");
  MollifierHandle h;
  h.profile_ = MollifierProfile::user_table;
  h.table_ = table;
  for (double& x : h.table_.v)
    if (x < 0.0) x = 0.0;
  const double mass = h.table_.integral();
  if (mass <= 0.0) throw std::invalid_argument("mollifier table has no mass");
  h.normalization_ = 1.0 / mass;
  h.support_radius_ = std::max(
      std::max(std::abs(table.spec.axes[0].lo), table.spec.axes[0].hi()),
      std::max(std::abs(table.spec.axes[1].lo), table.spec.axes[1].hi()));
  return h;
}

MollifierHandle MollifierHandle::from_table(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open mollifier table " + csv_path);
  std::vector<double> x1s, x2s, vals;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double a, b, c;
    char comma;
    if (ss >> a >> comma >> b >> comma >> c) {
      x1s.push_back(a);
      x2s.push_back(b);
      vals.push_back(c);
    }
  }
  if (vals.empty()) throw std::runtime_error("empty mollifier table " + csv_path);
  // infer the uniform grid
  auto uniq = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(),
                        [](double a, double b) { return std::abs(a - b) < 1e-12; }),
            v.end());
    return v;
  };
  const auto g1 = uniq(x1s), g2 = uniq(x2s);
  if (g1.size() < 4 || g2.size() < 4)
    throw std::runtime_error("mollifier table too small");
  GridSpec spec;
  spec.axes = {Axis{g1.front(), (g1.back() - g1.front()) / (g1.size() - 1),
                    static_cast<int>(g1.size())},
               Axis{g2.front(), (g2.back() - g2.front()) / (g2.size() - 1),
                    static_cast<int>(g2.size())}};
  GridFunction table(spec);
  for (std::size_t k = 0; k < vals.size(); ++k) {
    const int i = static_cast<int>(std::lround((x1s[k] - spec.axes[0].lo) / spec.axes[0].step));
    const int j = static_cast<int>(std::lround((x2s[k] - spec.axes[1].lo) / spec.axes[1].step));
    if (i < 0 || i >= spec.axes[0].count || j < 0 || j >= spec.axes[1].count)
      throw std::runtime_error("mollifier table row off the inferred grid");
    table.v[static_cast<std::size_t>(i) * spec.axes[1].count + j] = vals[k];
  }
  return from_table(table);
}

double MollifierHandle::eval_raw(double x1, double x2) const {
  if (profile_ == MollifierProfile::standard_bump)
    return bump_raw(x1 * x1 + x2 * x2);
  const double val = interp_cubic(table_, {x1, x2});
  return val > 0.0 ? val : 0.0;
}

double MollifierHandle::eval(double x1, double x2, std::optional<double> eps,
                             bool sqrt_phi) const {
  double scale = 1.0;
  if (eps) {
    if (*eps <= 0.0 || *eps > 1.0)
      throw std::domain_error("phi_eval: eps must be in (0, 1]");
    x1 /= *eps;
    x2 /= *eps;
    scale = 1.0 / (*eps * *eps);
  }
  const double val = scale * normalization_ * eval_raw(x1, x2);
  return sqrt_phi ? std::sqrt(val) : val;
}

double MollifierHandle::log_overlap_kphi() const {
  std::call_once(cache_->kphi_once, [this] {
    const double R = support_radius_;
    constexpr int kOuter = 48, kR = 96, kTheta = 64;
    std::vector<double> gx, gw, rx, rw, tx, tw;
    gauss_legendre_ab(kOuter, -R, R, gx, gw);
    gauss_legendre_ab(kTheta, 0.0, 2.0 * M_PI, tx, tw);
    double total = 0.0;
    for (int i = 0; i < kOuter; ++i) {
      for (int j = 0; j < kOuter; ++j) {
        const double p = eval(gx[i], gx[j]);
        if (p == 0.0) continue;
        // inner integral int Phi(x) log|x - x'| dx in polar around x'
        const double rmax = R + std::hypot(gx[i], gx[j]);
        gauss_legendre_ab(kR, 0.0, rmax, rx, rw);
        double inner = 0.0;
        for (int a = 0; a < kR; ++a) {
          double ring = 0.0;
          for (int b = 0; b < kTheta; ++b)
            ring += tw[b] * eval(gx[i] + rx[a] * std::cos(tx[b]),
                                 gx[j] + rx[a] * std::sin(tx[b]));
          inner += rw[a] * rx[a] * std::log(rx[a]) * ring;
        }
        total += gw[i] * gw[j] * p * inner;
      }
    }
    cache_->kphi = 2.0 * total;
  });
  return cache_->kphi;
}

double MollifierHandle::phi_sq_integral() const {
  std::call_once(cache_->psq_once, [this] {
    const double R = support_radius_;
    constexpr int kN = 96;
    std::vector<double> gx, gw;
    gauss_legendre_ab(kN, -R, R, gx, gw);
    double total = 0.0;
    for (int i = 0; i < kN; ++i)
      for (int j = 0; j < kN; ++j) {
        const double p = eval(gx[i], gx[j]);
        total += gw[i] * gw[j] * p * p;
      }
    cache_->psq = total;
  });
  return cache_->psq;
}

double beta_eps(double eps, double theta, const MollifierHandle& h) {
  if (eps <= 0.0 || eps >= 1.0)
    throw std::domain_error("beta_eps: eps must be in (0, 1)");
  constexpr double kGamma = 0.57721566490153286;
  const double L = std::abs(std::log(eps));
  return 2.0 * M_PI / L +
         M_PI / (L * L) *
             (theta - 2.0 * std::log(2.0) + 2.0 * kGamma + h.log_overlap_kphi());
}

}  // namespace dbose
