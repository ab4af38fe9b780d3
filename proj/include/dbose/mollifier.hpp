#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dbose/grid.hpp"

namespace dbose {

enum class MollifierProfile { standard_bump, user_table };

// The mollifier Phi: smooth, nonnegative, compactly supported, unit mass.
// phi = sqrt(Phi). Immutable after construction; K_Phi cached on first use.
class MollifierHandle {
 public:
  static MollifierHandle standard_bump();
  // Uniform-grid table (CSV rows x1,x2,value); renormalized to unit mass,
  // then audited (mass, nonnegativity).
  static MollifierHandle from_table(const std::string& csv_path);
  static MollifierHandle from_table(const GridFunction& table);

  MollifierProfile profile() const { return profile_; }
  double support_radius() const { return support_radius_; }
  double normalization() const { return normalization_; }

  // Phi(x); with eps: eps^-2 Phi(x/eps). sqrt_phi selects phi = sqrt(Phi),
  // scaled as sqrt of the Phi branch.
  double eval(double x1, double x2, std::optional<double> eps = std::nullopt,
              bool sqrt_phi = false) const;

  // K_Phi = 2 int int Phi(x) log|x-x'| Phi(x') dx dx'
  double log_overlap_kphi() const;

  // int Phi^2 (used for the large-u asymptote of the overlap b)
  double phi_sq_integral() const;

 private:
  MollifierHandle() = default;
  double eval_raw(double x1, double x2) const;  // unnormalized profile value

  MollifierProfile profile_ = MollifierProfile::standard_bump;
  double normalization_ = 1.0;    // multiplies the raw profile
  double support_radius_ = 1.0;
  GridFunction table_;            // user_table only

  struct Cache {
    std::once_flag kphi_once;
    double kphi = 0.0;
    std::once_flag psq_once;
    double psq = 0.0;
  };
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

// phi_eval in the spec's calling convention.
inline double phi_eval(const MollifierHandle& h, double x1, double x2,
                       std::optional<double> eps = std::nullopt,
                       bool sqrt_phi = false) {
  return h.eval(x1, x2, eps, sqrt_phi);
}

// Critical coupling beta_eps of the mollified Hamiltonian.
double beta_eps(double eps, double theta, const MollifierHandle& h);

}  // namespace dbose
