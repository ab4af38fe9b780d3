#include "dbose/spaces.hpp"

#include <cmath>
#include <stdexcept>

namespace dbose {

std::vector<PairIdx> enumerate_pairs(int n) {
  if (n < 2) throw std::domain_error("enumerate_pairs: n < 2");
  std::vector<PairIdx> out;
  out.reserve(n * (n - 1) / 2);
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) out.push_back({i, j});
  return out;
}

std::vector<Diagram> enumerate_diagrams(int n, int mmax) {
  const auto pairs = enumerate_pairs(n);
  std::vector<Diagram> out;
  std::vector<Diagram> current;
  for (const auto& p : pairs) current.push_back(Diagram{{p}});
  for (int m = 1; m <= mmax; ++m) {
    for (const auto& d : current) out.push_back(d);
    if (m == mmax) break;
    std::vector<Diagram> next;
    for (const auto& d : current)
      for (const auto& p : pairs)
        if (p != d.seq.back()) {
          Diagram e = d;
          e.seq.push_back(p);
          next.push_back(std::move(e));
        }
    current = std::move(next);
  }
  return out;
}

XPoint embed_s_alpha(const PairIdx& alpha, const YPoint& y, int n) {
  if (static_cast<int>(y.ys.size()) != n - 2)
    throw std::invalid_argument("embed_s_alpha: spectator count mismatch");
  XPoint x(n);
  int spec = 0;
  for (int k = 1; k <= n; ++k) {
    if (alpha.contains(k))
      x[k - 1] = y.yc;
    else
      x[k - 1] = y.ys[spec++];
  }
  return x;
}

XPoint embed_s_eps_alpha(const PairIdx& alpha, double eps, const YEpsPoint& y,
                         int n) {
  if (static_cast<int>(y.ys.size()) != n - 2)
    throw std::invalid_argument("embed_s_eps_alpha: spectator count mismatch");
  XPoint x(n);
  int spec = 0;
  for (int k = 1; k <= n; ++k) {
    if (k == alpha.i)
      x[k - 1] = {y.yc.x + 0.5 * eps * y.yr.x, y.yc.y + 0.5 * eps * y.yr.y};
    else if (k == alpha.j)
      x[k - 1] = {y.yc.x - 0.5 * eps * y.yr.x, y.yc.y - 0.5 * eps * y.yr.y};
    else
      x[k - 1] = y.ys[spec++];
  }
  return x;
}

int WeightedNormSpec::expected_axes() const {
  switch (kind) {
    case SpaceKind::X:
      return 2 * n;
    case SpaceKind::Y:
      return 2 + 2 * (n - 2);
    case SpaceKind::YEps:
      return 4 + 2 * (n - 2);
  }
  return 0;
}

double WeightedNormSpec::exponent(const std::vector<double>& c) const {
  double w = 0.0;
  switch (kind) {
    case SpaceKind::X:
      for (double v : c) w += std::abs(v);
      return a * w;
    case SpaceKind::Y: {
      w = 2.0 * (std::abs(c[0]) + std::abs(c[1]));
      for (std::size_t k = 2; k < c.size(); ++k) w += std::abs(c[k]);
      return a * w;
    }
    case SpaceKind::YEps: {
      // layout (yr, yc, spectators); weight sum_{sigma=+-} |yc + sigma eps yr/2|_1
      const double r1 = c[0], r2 = c[1], c1 = c[2], c2 = c[3];
      for (int sigma : {+1, -1}) {
        w += std::abs(c1 + 0.5 * sigma * eps * r1) +
             std::abs(c2 + 0.5 * sigma * eps * r2);
      }
      for (std::size_t k = 4; k < c.size(); ++k) w += std::abs(c[k]);
      return a * w;
    }
  }
  return 0.0;
}

double weighted_norm(const GridFunction& f, const WeightedNormSpec& spec) {
  if (static_cast<int>(f.spec.axes.size()) != spec.expected_axes())
    throw std::invalid_argument("weighted_norm: grid/space axis mismatch");
  const auto& axes = f.spec.axes;
  const int nd = static_cast<int>(axes.size());
  std::vector<int> idx(nd, 0);
  std::vector<double> coords(nd);
  double total = 0.0;
  for (std::size_t lin = 0; lin < f.v.size(); ++lin) {
    double w = 1.0;
    for (int d = 0; d < nd; ++d) {
      w *= axes[d].weight(idx[d]);
      coords[d] = axes[d].node(idx[d]);
    }
    const double val = f.v[lin] * std::exp(spec.exponent(coords));
    total += w * val * val;
    for (int d = nd - 1; d >= 0; --d) {
      if (++idx[d] < axes[d].count) break;
      idx[d] = 0;
    }
  }
  return std::sqrt(total);
}

}  // namespace dbose
