#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dbose/grid.hpp"

using namespace dbose;

namespace {

GridFunction gaussian2d(const Axis& ax, double var, double cx = 0.0,
                        double cy = 0.0) {
  GridFunction g(GridSpec{{ax, ax}});
  fill_grid(g, [&](const std::vector<double>& x) {
    return gauss1d(var, x[0] - cx) * gauss1d(var, x[1] - cy);
  });
  return g;
}

}  // namespace

TEST_CASE("trapezoid integral of a gaussian") {
  const Axis ax = Axis::symmetric(8.0, 65);
  const GridFunction g = gaussian2d(ax, 1.0);
  CHECK(g.integral() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("gaussian conv realizes the heat semigroup") {
  const Axis ax = Axis::symmetric(9.0, 73);
  GridFunction g = gaussian2d(ax, 0.7);
  gauss_conv_axis(g, 0, 0.5);
  gauss_conv_axis(g, 1, 0.5);
  const GridFunction ref = gaussian2d(ax, 1.2);
  double maxerr = 0.0;
  for (std::size_t i = 0; i < g.v.size(); ++i)
    maxerr = std::max(maxerr, std::abs(g.v[i] - ref.v[i]));
  CHECK(maxerr < 2e-6);
}

TEST_CASE("conv preserves mass via the exact-mass row normalization") {
  const Axis ax = Axis::symmetric(6.0, 41);
  GridFunction g = gaussian2d(ax, 0.4);
  const double m0 = g.integral();
  gauss_conv_all(g, 0.05);  // width ~ 0.22 ~ 0.75 grid steps: near-delta
  CHECK(g.integral() == doctest::Approx(m0).epsilon(5e-4));
}

TEST_CASE("adjoint conv is the exact l2 transpose") {
  const Axis ax = Axis::symmetric(3.0, 17);
  GridFunction u(GridSpec{{ax}}), v(GridSpec{{ax}});
  for (int i = 0; i < 17; ++i) {
    u.v[i] = std::sin(0.3 * i + 0.2);
    v.v[i] = std::cos(0.51 * i);
  }
  GridFunction Au = u;
  gauss_conv_axis(Au, 0, 0.8, true);
  GridFunction Atv = v;
  gauss_conv_axis_adjoint(Atv, 0, 0.8, true);
  double lhs = 0.0, rhs = 0.0;
  for (int i = 0; i < 17; ++i) {
    lhs += Au.v[i] * v.v[i];
    rhs += u.v[i] * Atv.v[i];
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
}

TEST_CASE("cubic interpolation reproduces smooth fields") {
  const Axis ax = Axis::symmetric(4.0, 33);
  GridFunction g(GridSpec{{ax, ax}});
  fill_grid(g, [](const std::vector<double>& x) {
    return std::exp(-0.25 * (x[0] * x[0] + x[1] * x[1]));
  });
  const double v = interp_cubic(g, {0.3777, -1.2345});
  const double ref = std::exp(-0.25 * (0.3777 * 0.3777 + 1.2345 * 1.2345));
  CHECK(v == doctest::Approx(ref).epsilon(1e-3));  // O(h^3) at h = 0.25
  CHECK(interp_cubic(g, {11.0, 0.0}) == 0.0);
}
