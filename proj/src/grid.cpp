#include "dbose/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace dbose {

std::vector<std::size_t> GridSpec::strides() const {
  std::vector<std::size_t> s(axes.size(), 1);
  for (int d = static_cast<int>(axes.size()) - 2; d >= 0; --d)
    s[d] = s[d + 1] * static_cast<std::size_t>(axes[d + 1].count);
  return s;
}

bool GridSpec::compatible(const GridSpec& o) const {
  if (axes.size() != o.axes.size()) return false;
  for (std::size_t d = 0; d < axes.size(); ++d) {
    if (axes[d].count != o.axes[d].count) return false;
    if (std::abs(axes[d].lo - o.axes[d].lo) > 1e-12) return false;
    if (std::abs(axes[d].step - o.axes[d].step) > 1e-12) return false;
  }
  return true;
}

double& GridFunction::at(const std::vector<int>& idx) {
  const auto s = spec.strides();
  std::size_t lin = 0;
  for (std::size_t d = 0; d < idx.size(); ++d) lin += s[d] * idx[d];
  return v[lin];
}

double GridFunction::integral() const {
  const auto& axes = spec.axes;
  const int nd = static_cast<int>(axes.size());
  std::vector<int> idx(nd, 0);
  double total = 0.0;
  for (std::size_t lin = 0; lin < v.size(); ++lin) {
    double w = 1.0;
    for (int d = 0; d < nd; ++d) w *= axes[d].weight(idx[d]);
    total += w * v[lin];
    for (int d = nd - 1; d >= 0; --d) {
      if (++idx[d] < axes[d].count) break;
      idx[d] = 0;
    }
  }
  return total;
}

double GridFunction::l2_sq_weighted(const std::vector<double>& pw) const {
  const auto& axes = spec.axes;
  const int nd = static_cast<int>(axes.size());
  std::vector<int> idx(nd, 0);
  double total = 0.0;
  for (std::size_t lin = 0; lin < v.size(); ++lin) {
    double w = 1.0;
    for (int d = 0; d < nd; ++d) w *= axes[d].weight(idx[d]);
    total += w * v[lin] * v[lin] * pw[lin];
    for (int d = nd - 1; d >= 0; --d) {
      if (++idx[d] < axes[d].count) break;
      idx[d] = 0;
    }
  }
  return total;
}

double gauss1d(double var, double x) {
  return std::exp(-x * x / (2.0 * var)) / std::sqrt(2.0 * M_PI * var);
}

double heat2d(double t, double x1, double x2) {
  return std::exp(-(x1 * x1 + x2 * x2) / (2.0 * t)) / (2.0 * M_PI * t);
}

namespace {

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

namespace {

// out_i = post_i * sum_j K(i-j) pre_j in_j over every line along `axis`
void toeplitz_axis_apply(GridFunction& g, int axis,
                         const std::vector<double>& K,
                         const std::vector<double>& pre,
                         const std::vector<double>& post) {
  const auto& axes = g.spec.axes;
  const int m = axes[axis].count;
  const auto strides = g.spec.strides();
  const std::size_t stride = strides[axis];
  const std::size_t lines = g.v.size() / m;
  std::vector<double> line(m), out(m);
  for (std::size_t l = 0; l < lines; ++l) {
    std::size_t base = 0;
    {
      std::size_t rem = l;
      for (int d = static_cast<int>(axes.size()) - 1; d >= 0; --d) {
        if (d == axis) continue;
        const std::size_t c = static_cast<std::size_t>(axes[d].count);
        base += (rem % c) * strides[d];
        rem /= c;
      }
    }
    for (int j = 0; j < m; ++j) line[j] = pre[j] * g.v[base + j * stride];
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      const double* Kp = &K[i + m - 1];
      for (int j = 0; j < m; ++j) acc += Kp[-j] * line[j];
      out[i] = acc * post[i];
    }
    for (int i = 0; i < m; ++i) g.v[base + i * stride] = out[i];
  }
}

void conv_tables(const Axis& ax, double var, bool exact_mass,
                 std::vector<double>& K, std::vector<double>& w,
                 std::vector<double>& rn) {
  const int m = ax.count;
  const double h = ax.step;
  const double sd = std::sqrt(var);
  K.resize(2 * m - 1);
  for (int d = -(m - 1); d <= m - 1; ++d)
    K[d + m - 1] = gauss1d(var, d * h);
  w.resize(m);
  for (int i = 0; i < m; ++i) w[i] = ax.weight(i);
  rn.assign(m, 1.0);
  if (exact_mass) {
    for (int i = 0; i < m; ++i) {
      double disc = 0.0;
      for (int j = 0; j < m; ++j) disc += w[j] * K[i - j + m - 1];
      const double xi = ax.node(i);
      const double exact =
          norm_cdf((ax.hi() - xi) / sd) - norm_cdf((ax.lo - xi) / sd);
      rn[i] = (disc > 1e-300) ? exact / disc : 0.0;
    }
  }
}

}  // namespace

void gauss_conv_axis(GridFunction& g, int axis, double var, bool exact_mass) {
  if (var <= 0.0) return;
  std::vector<double> K, w, rn;
  conv_tables(g.spec.axes[axis], var, exact_mass, K, w, rn);
  toeplitz_axis_apply(g, axis, K, w, rn);
}

void gauss_conv_axis_adjoint(GridFunction& g, int axis, double var,
                             bool exact_mass) {
  if (var <= 0.0) return;
  std::vector<double> K, w, rn;
  conv_tables(g.spec.axes[axis], var, exact_mass, K, w, rn);
  toeplitz_axis_apply(g, axis, K, rn, w);  // K symmetric; scalings swap
}

void gauss_conv_all(GridFunction& g, double var, bool exact_mass) {
  for (int d = 0; d < static_cast<int>(g.spec.axes.size()); ++d)
    gauss_conv_axis(g, d, var, exact_mass);
}

namespace {

// Catmull-Rom weights for fractional position t in [0,1]
inline void cr_weights(double t, double w[4]) {
  const double t2 = t * t, t3 = t2 * t;
  w[0] = 0.5 * (-t3 + 2 * t2 - t);
  w[1] = 0.5 * (3 * t3 - 5 * t2 + 2);
  w[2] = 0.5 * (-3 * t3 + 4 * t2 + t);
  w[3] = 0.5 * (t3 - t2);
}

double interp_rec(const GridFunction& g, const std::vector<double>& x,
                  const std::vector<std::size_t>& strides, int dim,
                  std::size_t base) {
  const Axis& ax = g.spec.axes[dim];
  const double p = (x[dim] - ax.lo) / ax.step;
  if (p < 0.0 || p > ax.count - 1) return 0.0;
  int i0 = static_cast<int>(std::floor(p));
  if (i0 >= ax.count - 1) i0 = ax.count - 2;
  const double t = p - i0;
  double w[4];
  cr_weights(t, w);
  double acc = 0.0;
  for (int k = -1; k <= 2; ++k) {
    int i = i0 + k;
    if (i < 0) i = 0;  // clamp; interior accuracy unaffected
    if (i > ax.count - 1) i = ax.count - 1;
    const std::size_t b = base + static_cast<std::size_t>(i) * strides[dim];
    const double val = (dim + 1 == static_cast<int>(g.spec.axes.size()))
                           ? g.v[b]
                           : interp_rec(g, x, strides, dim + 1, b);
    acc += w[k + 1] * val;
  }
  return acc;
}

}  // namespace

double interp_cubic(const GridFunction& g, const std::vector<double>& x) {
  if (x.size() != g.spec.axes.size())
    throw std::invalid_argument("interp_cubic: dimension mismatch");
  return interp_rec(g, x, g.spec.strides(), 0, 0);
}

}  // namespace dbose
