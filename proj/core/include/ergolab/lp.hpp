#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ergolab/grid.hpp"
#include "ergolab/measure.hpp"
#include "ergolab/model.hpp"

namespace ergolab {

struct VGridSpec {
  double radius = 0.0;      // velocity box [-radius, radius]^n
  int points_per_axis = 0;  // must be odd so v = 0 is a node
};

/// -Hbar(p) as a finite LP over discrete measures mu_ij >= 0 on x-grid times
/// velocity box: minimize sum (L(x_i,v_j) - p.v_j) mu_ij subject to one
/// holonomy equality per x-node (same stencils as the PDE side) and total
/// mass 1.
class HolonomicLP {
 public:
  static HolonomicLP build(const HamiltonianModel& model, const TorusGrid& xgrid,
                           const VGridSpec& vspec, const Vec& p, double eps);

  const TorusGrid& xgrid() const { return xgrid_; }
  const VGridSpec& vspec() const { return vspec_; }
  double eps() const { return eps_; }
  const Vec& p() const { return p_; }
  int num_variables() const { return static_cast<int>(cost_.size()); }
  int num_constraints() const { return static_cast<int>(rhs_.size()); }
  const Eigen::VectorXd& cost() const { return cost_; }
  const Eigen::MatrixXd& constraints() const { return a_; }
  const Eigen::VectorXd& rhs() const { return rhs_; }
  Vec velocity(int j) const;
  int num_vnodes() const;

  /// Plain-text audit dump: objective, sparse (row, col, coeff) triples,
  /// senses and right-hand sides.
  void export_text(std::ostream& os) const;

 private:
  TorusGrid xgrid_;
  VGridSpec vspec_;
  double eps_ = 0.0;
  Vec p_ = Vec::Zero();
  Eigen::VectorXd cost_;
  Eigen::MatrixXd a_;   // (n_x + 1) x (n_x * n_v); last row = all ones
  Eigen::VectorXd rhs_;
};

enum class LPStatus { optimal, infeasible, iteration_limit };

struct LPResult {
  double value = 0.0;  // optimal objective = -Hbar_LP
  LPStatus status = LPStatus::infeasible;
  std::optional<ProductMeasure> measure;
  std::vector<double> dual_certificate;  // one multiplier per constraint row
  double feasibility_residual = 0.0;     // ||A x - b||_inf at the solution
  double comp_slack_gap = 0.0;           // |c.x - b.y| / (1 + |c.x|)
  long iterations = 0;
};

LPResult solve_lp(const HolonomicLP& lp);

/// Min and max of integral of (v . xi) d mu over the optimal face (primal
/// value pinned within a 1e-9 band): the one-sided directional derivatives
/// of Hbar at p in direction xi.
std::pair<double, double> optimal_face_extremize(const HolonomicLP& lp,
                                                 const LPResult& primal, const Vec& xi);

struct LpPdeGap {
  double hbar_lp = 0.0;
  double pde_c = 0.0;
  double gap = 0.0;
};

/// |Hbar_LP - c| between the LP and the Newton cell solve on the same x-grid.
LpPdeGap lp_vs_pde_gap(const HamiltonianModel& model, const Vec& p, double eps,
                       const TorusGrid& xgrid, const VGridSpec& vspec);

/// 1.5 * support_radius with the mechanical a-priori gradient estimate; the
/// suggested velocity-box radius for build().
double recommended_vradius(const HamiltonianModel& model, const Vec& p);

}  // namespace ergolab
