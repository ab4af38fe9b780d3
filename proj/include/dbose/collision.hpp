#pragma once

#include <vector>

#include "dbose/grid.hpp"
#include "dbose/mollifier.hpp"
#include "dbose/spaces.hpp"
#include "dbose/specfun.hpp"

namespace dbose {

// Deterministic n = 2 semigroup evaluator in rotated coordinates
// Delta = x1 - x2, Xbar = (x1 + x2)/2. Every chain factor splits as
// (operator on y_r / Delta) x (heat convolution on Xbar), and the Xbar
// variances telescope, so S(t) = G(t) + C_Delta(t) (x) conv_Xbar(t/2).
// The collision series is resummed by marching the Volterra equation
// W = V + beta K * W  (K = phi hk_eps(2.) phi on the y_r grid).
struct CollisionOptions {
  int mr = 13;        // y_r nodes per axis on supp phi
  int nu = 320;       // marching bins over [0, t]
  int n_tau0 = 24;    // outer time quadrature nodes
  int n_u = 40;       // log-mapped nodes for the limiting collision time
  double sigma2 = 1.0;  // Gaussian initial data: product N(0, sigma2 I_2)
};

class CollisionEvaluator {
 public:
  CollisionEvaluator(const MollifierHandle& h, const ScalarParams& params,
                     double theta, const JTable* jtable,
                     CollisionOptions opt = {});

  const ScalarParams& params() const { return params_; }
  const CollisionOptions& options() const { return opt_; }

  // marched resolvent state for one horizon t (Gaussian initial data)
  struct EpsChain {
    double t = 0.0;
    double h = 0.0;                       // bin width
    std::vector<std::vector<double>> W;   // W[i] on the y_r grid, r_i = i h
  };
  EpsChain solve_eps_chain(double t) const;

  // G(t) f in rotated coordinates (Gaussian initial data)
  double heat_value(double t, Vec2 Delta, Vec2 Xbar) const;
  // (S^eps(t) - G(t)) f and (S(t) - G(t)) f
  double corr_eps_value(const EpsChain& chain, Vec2 Delta, Vec2 Xbar) const;
  double corr_lim_value(double t, Vec2 Delta, Vec2 Xbar) const;
  double s_eps_value(const EpsChain& chain, Vec2 Delta, Vec2 Xbar) const {
    return heat_value(chain.t, Delta, Xbar) +
           corr_eps_value(chain, Delta, Xbar);
  }
  double s_lim_value(double t, Vec2 Delta, Vec2 Xbar) const {
    return heat_value(t, Delta, Xbar) + corr_lim_value(t, Delta, Xbar);
  }

  // correction fields on the (Delta, Xbar) product grid, axes per component
  GridFunction corr_eps_field(double t, const Axis& dax, const Axis& xax) const;
  GridFunction corr_lim_field(double t, const Axis& dax, const Axis& xax) const;

  // || S^eps(t) f - S(t) f ||_{2,a} on the rotated grid; err_est from one
  // quadrature refinement
  struct Distance {
    double value = 0.0;
    double err_est = 0.0;
  };
  Distance convergence_distance(double t, double a, const Axis& dax,
                                const Axis& xax) const;

  // dense collision operators C_Delta(t) on a Delta grid (in-weights folded)
  std::vector<double> collision_matrix_lim(double t, const Axis& dax) const;
  std::vector<double> collision_matrix_eps(double t, const Axis& dax) const;

  // weighted operator-norm estimates of S(t) / S^eps(t) on the rotated grid
  double opnorm_weighted(double t, double a, bool eps_variant, const Axis& dax,
                         const Axis& xax, int iters) const;

  // ---- building blocks shared with the norm laboratory ----
  int nr() const { return nr_; }
  const std::vector<double>& yr_nodes_x() const { return yr1_; }
  const std::vector<double>& yr_nodes_y() const { return yr2_; }
  const std::vector<double>& yr_weights() const { return wr_; }
  const std::vector<double>& phi_values() const { return phi_; }

  // K(u) = phi hk_eps(2u) phi on the y_r grid, in-weights folded (NR x NR)
  std::vector<double> k_matrix(double u) const;

  // j^eps(u) matrices by marching the matrix Volterra equation on [0, umax]
  struct JepsMatrixTable {
    double h = 0.0;
    std::vector<std::vector<double>> mats;  // mats[i] at u = i h (i >= 1)
  };
  JepsMatrixTable jeps_matrix_table(double umax, int nu) const;
  // largest singular value of the (weight-balanced) j^eps(u) matrix
  double jeps_opnorm(const JepsMatrixTable& table, double u) const;

 private:
  std::vector<double> gaussian_incoming(double s) const;  // phi g(2s, eps yr)
  void accumulate_delta_profile(const std::vector<double>& coef, double tau0,
                                const Axis& dax, std::vector<double>& P) const;

  const MollifierHandle* h_;
  ScalarParams params_;
  double theta_;
  const JTable* jtable_;
  CollisionOptions opt_;

  int nr_ = 0;                 // total y_r nodes (mr^2)
  std::vector<double> yr1_, yr2_, wr_, phi_;
  double rstep_ = 0.0;
};

}  // namespace dbose
