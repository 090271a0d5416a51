#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ergolab/cell.hpp"
#include "ergolab/grid.hpp"
#include "ergolab/lp.hpp"
#include "ergolab/measure.hpp"
#include "ergolab/model.hpp"

namespace ergolab {

/// dc/d eps at one (model, p, eps) sample, by the two integral formulas and
/// by central finite differences. The Lagrangian form uses the p-shifted
/// integrand (-v).(D_vL(x,v) - p); on the support graph D_vL - p = Du, which
/// is what makes the two forms agree to round-off at every p, not just p = 0.
struct DerivativeReport {
  double eps = 0.0;
  double c = 0.0;
  double c_prime_formula_laplacian = 0.0;   // -integral of Lap u d mu
  double c_prime_formula_lagrangian = 0.0;  // eps^-1 integral of (-v).(D_vL - p) d mu
  double c_prime_fd = 0.0;
  double fd_step = 0.0;
  double discrepancy_forms = 0.0;
  double discrepancy_fd = 0.0;
};

DerivativeReport c_prime(const HamiltonianModel& model, const CellSolution& cell,
                         const GraphMeasure& mu, const SolverOptions& opts = {});

std::string derivative_csv(const std::vector<DerivativeReport>& rows);

struct SemiconvexEntry {
  double eta = 0.0;
  double second_difference = 0.0;  // c(eps+eta) + c(eps-eta) - 2 c(eps)
  double bound = 0.0;              // -(integral v.D_vvL.v d mu) eps^-2 eta^2
};

std::vector<SemiconvexEntry> semiconvexity_probe(const HamiltonianModel& model,
                                                 const TorusGrid& grid, const Vec& p,
                                                 double eps,
                                                 const std::vector<double>& eta_list,
                                                 const SolverOptions& opts = {});

std::string semiconvexity_csv(const std::vector<SemiconvexEntry>& rows);

struct RateFit {
  std::vector<double> eps_samples;  // strictly decreasing, in (0,1)
  std::vector<double> c_values;
  double c0_reference = 0.0;
  double slope_bound = 0.0;  // max |c(eps) - c(0)| / eps over the samples
  bool sandwich_ok = false;  // mechanical two-sided bound with this slope
};

/// Vanishing-viscosity rate at p = 0. c(0) comes from the analytic oracle for
/// 1D mechanical q=2 models, or must be supplied.
RateFit rate_probe(const HamiltonianModel& model, const TorusGrid& grid,
                   const std::vector<double>& eps_samples,
                   std::optional<double> c0_reference = std::nullopt,
                   const SolverOptions& opts = {});

std::string rate_csv(const RateFit& fit);

struct GradReport {
  Vec gradient = Vec::Zero();     // integral of v d mu, componentwise
  Vec fd_gradient = Vec::Zero();  // central differences of p -> c, step 1e-4
  double gap = 0.0;               // max-norm difference
};

GradReport grad_hbar_eps(const HamiltonianModel& model, const TorusGrid& grid, const Vec& p,
                         double eps, const SolverOptions& opts = {});

struct InviscidValue {
  double hbar = 0.0;
  double flat_halfwidth = 0.0;  // p* = integral of sqrt(2 V)
  double dhbar_dp = 0.0;
};

/// Classical 1D quadrature oracle for mechanical q=2 models with min V = 0.
InviscidValue inviscid_oracle(const HamiltonianModel& model, double p);

struct OneSidedReport {
  double dminus = 0.0;
  double dplus = 0.0;
  /// Quadrature cross-check, present for 1D mechanical q=2 away from |p| = p*.
  std::optional<double> oracle_dhbar;
};

/// One-sided directional derivatives of the inviscid Hbar at p in direction
/// xi, from the eps = 0 holonomic LP optimal face.
OneSidedReport one_sided_dhbar_inviscid(const HamiltonianModel& model,
                                        const TorusGrid& xgrid, const VGridSpec& vspec,
                                        const Vec& p, const Vec& xi);

struct HessianBound {
  double lhs = 0.0;    // integral of |D^2 u|_F^2 d mu
  double rhs = 0.0;    // C n / gamma
  double gamma = 0.0;  // sampled min eigenvalue of D_xixi H
  double big_c = 0.0;  // sampled sup of |D_xx H| + (2/gamma) |D_xxi H|^2
};

HessianBound hessian_integral_bound(const HamiltonianModel& model, const CellSolution& cell,
                                    const GraphMeasure& mu);

}  // namespace ergolab
