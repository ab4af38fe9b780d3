#pragma once

#include <cstddef>
#include <vector>

namespace dbose {

// Uniform 1-d axis: nodes lo + i*step, i = 0..count-1.
struct Axis {
  double lo = 0.0;
  double step = 1.0;
  int count = 1;

  double node(int i) const { return lo + i * step; }
  double hi() const { return lo + (count - 1) * step; }
  // trapezoid quadrature weight of node i
  double weight(int i) const {
    return (i == 0 || i == count - 1) ? 0.5 * step : step;
  }
  static Axis symmetric(double extent, int count) {
    return Axis{-extent, 2.0 * extent / (count - 1), count};
  }
};

struct GridSpec {
  std::vector<Axis> axes;

  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& a : axes) n *= static_cast<std::size_t>(a.count);
    return n;
  }
  // row-major strides (last axis fastest)
  std::vector<std::size_t> strides() const;
  bool compatible(const GridSpec& o) const;
};

// Tensor-grid sample of a function, row-major storage.
struct GridFunction {
  GridSpec spec;
  std::vector<double> v;

  GridFunction() = default;
  explicit GridFunction(GridSpec s) : spec(std::move(s)), v(spec.size(), 0.0) {}

  double& at(const std::vector<int>& idx);
  // trapezoid integral of v over the grid
  double integral() const;
  // trapezoid integral of f(v, node) over the grid
  double l2_sq_weighted(const std::vector<double>& pointwise_sq_weight) const;
};

// Fill by calling f(coords) at every node.
template <typename F>
void fill_grid(GridFunction& g, F&& f) {
  const auto& axes = g.spec.axes;
  const int nd = static_cast<int>(axes.size());
  std::vector<int> idx(nd, 0);
  std::vector<double> x(nd);
  for (std::size_t lin = 0; lin < g.v.size(); ++lin) {
    for (int d = 0; d < nd; ++d) x[d] = axes[d].node(idx[d]);
    g.v[lin] = f(x);
    for (int d = nd - 1; d >= 0; --d) {
      if (++idx[d] < axes[d].count) break;
      idx[d] = 0;
    }
  }
}

// Visit every node: f(linear_index, coords).
template <typename F>
void for_each_node(const GridSpec& spec, F&& f) {
  const auto& axes = spec.axes;
  const int nd = static_cast<int>(axes.size());
  std::vector<int> idx(nd, 0);
  std::vector<double> x(nd);
  const std::size_t total = spec.size();
  for (std::size_t lin = 0; lin < total; ++lin) {
    for (int d = 0; d < nd; ++d) x[d] = axes[d].node(idx[d]);
    f(lin, x);
    for (int d = nd - 1; d >= 0; --d) {
      if (++idx[d] < axes[d].count) break;
      idx[d] = 0;
    }
  }
}

// 1-d heat kernel exp(-x^2/(2 var)) / sqrt(2 pi var).
double gauss1d(double var, double x);
// 2-d heat kernel g(t, x) = exp(-|x|^2/(2t)) / (2 pi t) with x = (x1, x2).
double heat2d(double t, double x1, double x2);

// Convolve along one axis with the Gaussian of per-axis variance `var`.
// exact_mass: rescale each output row so the discrete kernel mass equals the
// true truncated mass (keeps near-delta kernels consistent on coarse grids).
void gauss_conv_axis(GridFunction& g, int axis, double var, bool exact_mass = true);

// Convolve along all axes (product heat kernel), variance per scalar axis.
void gauss_conv_all(GridFunction& g, double var, bool exact_mass = true);

// Exact l2 transpose of gauss_conv_axis (weights and row normalization land
// on the opposite sides); needed by power iterations on T^T T.
void gauss_conv_axis_adjoint(GridFunction& g, int axis, double var,
                             bool exact_mass = true);

// Catmull-Rom interpolation of g at point x (size = ndim); 0 outside the grid.
double interp_cubic(const GridFunction& g, const std::vector<double>& x);

}  // namespace dbose
