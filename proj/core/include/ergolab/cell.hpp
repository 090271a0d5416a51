#pragma once

#include <string>
#include <vector>

#include "ergolab/grid.hpp"
#include "ergolab/model.hpp"

namespace ergolab {

struct SolverOptions {
  double tol = 1e-10;        // residual max-norm target
  int max_iter = 60;
  double damping = 0.5;      // line-search contraction factor
  double parabolic_dt = 5e-4;
  double parabolic_T = 400.0;

  void validate() const {
    if (tol <= 0) throw ConfigError("SolverOptions: tol must be > 0");
    if (damping <= 0 || damping >= 1)
      throw ConfigError("SolverOptions: damping must lie in (0,1)");
  }
};

enum class CellMethod { newton, parabolic };

/// Converged discrete solution of H(x, p + Du) - eps Lap u = c with u
/// normalized to 0 at the first grid node.
struct CellSolution {
  Vec p = Vec::Zero();
  double eps = 0.0;
  GridField u;              // scalar, u[0] == 0
  double c = 0.0;           // discrete effective Hamiltonian value
  double residual_linf = 0.0;
  double grad_linf = 0.0;   // max node |Du|, for the gradient-bound report
  int iterations = 0;
  CellMethod method = CellMethod::newton;

  std::string to_json(const std::string& u_csv_ref = "") const;
};

/// h * max|D_pH| / (2 eps); solvers require this to be <= 2.
double mesh_peclet(const HamiltonianModel& model, const TorusGrid& grid, const Vec& p,
                   double eps);

/// Newton iteration on the augmented unknown (u without the pinned node, c).
CellSolution solve_cell(const HamiltonianModel& model, const TorusGrid& grid, const Vec& p,
                        double eps, const SolverOptions& opts = {});

/// Long-time marching of w_t + H(x, p + Dw) - eps Lap w = 0; implicit in the
/// diffusion, explicit in the Hamiltonian. Cross-validates solve_cell.
CellSolution parabolic_march(const HamiltonianModel& model, const TorusGrid& grid,
                             const Vec& p, double eps, const SolverOptions& opts = {});

struct HopfColeResult {
  double eigenvalue = 0.0;  // largest eigenvalue of 2 eps^2 Lap - V
  GridField phi;            // positive eigenfunction, ||phi||_2 = 1
};

/// Independent oracle for mechanical q=2 models: the cell constant equals the
/// principal eigenvalue of 2 eps^2 Lap - V (log transform u = -2 eps log phi).
HopfColeResult hopf_cole_eigenvalue(const HamiltonianModel& model, const TorusGrid& grid,
                                    double eps);

struct BernsteinEntry {
  double eps;
  double grad_linf;
};
struct BernsteinReport {
  std::vector<BernsteinEntry> entries;  // in the order given
  bool growth_flag = false;  // >20% growth while eps decreases: under-resolution
};

BernsteinReport bernstein_report(const HamiltonianModel& model, const TorusGrid& grid,
                                 const Vec& p, const std::vector<double>& eps_list,
                                 const SolverOptions& opts = {});

/// Residual of (u, c) under an independently assembled evaluator (consistency
/// check; shares no state with the Newton path).
double cell_residual(const HamiltonianModel& model, const Vec& p, double eps,
                     const GridField& u, double c);

}  // namespace ergolab
