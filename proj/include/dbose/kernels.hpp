#pragma once

#include <cstdint>
#include <optional>

#include "dbose/mollifier.hpp"
#include "dbose/spaces.hpp"
#include "dbose/specfun.hpp"

namespace dbose {

enum class KernelKind {
  heat,
  incoming,
  incoming_adj,
  swapping,
  jop,
  heat_eps_incoming,
  heat_eps_incoming_adj,
  heat_eps_swapping,
  jop_eps
};

struct KernelDescriptor {
  KernelKind kind = KernelKind::heat;
  PairIdx alpha{1, 2};
  std::optional<PairIdx> alpha_prime;
  double t = 1.0;
  std::optional<double> eps;

  void validate(int n) const;
  bool is_eps() const {
    return kind == KernelKind::heat_eps_incoming ||
           kind == KernelKind::heat_eps_incoming_adj ||
           kind == KernelKind::heat_eps_swapping || kind == KernelKind::jop_eps;
  }
};

// Point in one of the three coordinate spaces.
struct KPoint {
  SpaceKind kind = SpaceKind::X;
  XPoint x;
  YPoint y;
  YEpsPoint ye;

  static KPoint of(XPoint p) { return {SpaceKind::X, std::move(p), {}, {}}; }
  static KPoint of(YPoint p) { return {SpaceKind::Y, {}, std::move(p), {}}; }
  static KPoint of(YEpsPoint p) { return {SpaceKind::YEps, {}, {}, std::move(p)}; }
};

struct KernelContext {
  const MollifierHandle* mollifier = nullptr;
  const JTable* jtable = nullptr;  // limiting j cache; nullptr -> direct
  bool j_direct = false;           // force direct quadrature for j(t)
  double theta = 0.0;
  ScalarParams params;             // eps kernels: beta, c0, ...
  int n = 2;
  // j^eps series evaluation knobs
  int jeps_grid = 64;      // tensor nodes per axis on supp phi
  int jeps_nsamples = 256; // simplex MC samples per term, l >= 3
  std::uint64_t jeps_seed = 271828;

  double j_of(double t) const {
    if (jtable && !j_direct) return (*jtable)(t);
    return volterra_j(t, theta).value;
  }
};

// Product heat kernel over 2-d blocks: prod_i hk(t, x_i).
double heat_kernel(double t, const XPoint& x);

// Pointwise kernel value for any descriptor; point spaces must match the kind.
double kernel_eval(const KernelDescriptor& d, const KPoint& out_pt,
                   const KPoint& in_pt, const KernelContext& ctx);

// j^eps(t, yr, yr2): truncated collision series on the y_r space.
// l = 1, 2 deterministic; l >= 3 by fixed-seed symmetrized simplex MC.
double jeps_kernel(double t, Vec2 yr, Vec2 yr2, int lmax,
                   const KernelContext& ctx);

}  // namespace dbose
