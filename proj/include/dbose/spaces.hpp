#pragma once

#include <vector>

#include "dbose/grid.hpp"

namespace dbose {

// Unordered pair {i < j} of particles in [1, n].
struct PairIdx {
  int i = 1;
  int j = 2;

  bool operator==(const PairIdx& o) const { return i == o.i && j == o.j; }
  bool operator!=(const PairIdx& o) const { return !(*this == o); }
  bool operator<(const PairIdx& o) const {
    return i != o.i ? i < o.i : j < o.j;
  }
  bool contains(int k) const { return k == i || k == j; }
};

std::vector<PairIdx> enumerate_pairs(int n);

// Sequence of pairs with no adjacent repeats.
struct Diagram {
  std::vector<PairIdx> seq;

  int length() const { return static_cast<int>(seq.size()); }
  bool valid() const {
    if (seq.empty()) return false;
    for (std::size_t k = 0; k + 1 < seq.size(); ++k)
      if (seq[k] == seq[k + 1]) return false;
    return true;
  }
};

// All diagrams of length <= mmax, ordered by (length, lexicographic).
std::vector<Diagram> enumerate_diagrams(int n, int mmax);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

using XPoint = std::vector<Vec2>;  // n coordinates

struct YPoint {
  Vec2 yc;
  std::vector<Vec2> ys;  // spectators, increasing particle index
};

struct YEpsPoint {
  Vec2 yr;
  Vec2 yc;
  std::vector<Vec2> ys;
};

// (S_alpha y)_i = yc for i in alpha, else the spectator coordinate.
XPoint embed_s_alpha(const PairIdx& alpha, const YPoint& y, int n);
// (S^eps_alpha y)_i = yc + eps yr / 2 (i), yc - eps yr / 2 (j), spectators else.
XPoint embed_s_eps_alpha(const PairIdx& alpha, double eps, const YEpsPoint& y,
                         int n);

enum class SpaceKind { X, Y, YEps };

// Weighted-norm data: which space the grid represents and the exponent a.
struct WeightedNormSpec {
  double a = 0.0;
  SpaceKind kind = SpaceKind::X;
  int n = 2;
  PairIdx alpha{1, 2};
  double eps = 0.0;  // YEps only

  // weight exponent w(x) with coords laid out per space convention
  double exponent(const std::vector<double>& coords) const;
  int expected_axes() const;
};

// Trapezoid approximation of ( int |f e^{w}|^2 )^{1/2}.
double weighted_norm(const GridFunction& f, const WeightedNormSpec& spec);

}  // namespace dbose
