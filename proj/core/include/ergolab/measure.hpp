#pragma once

#include <functional>
#include <string>

#include "ergolab/cell.hpp"
#include "ergolab/grid.hpp"
#include "ergolab/model.hpp"

namespace ergolab {

/// Probability measure theta(x) dx supported on the graph {(x, v(x))} with
/// v(x) = D_pH(x, p + Du). The velocity field is stored together with a
/// separate scalar factor so that rescaling v and eps by lambda is exact in
/// floating point: scale_measure only touches `velocity_scale`, and
/// holonomy_residual factors it back out before any arithmetic.
class GraphMeasure {
 public:
  GraphMeasure(GridField theta, GridField vfield, double eps, const Vec& p);

  const TorusGrid& grid() const { return theta_.grid(); }
  const GridField& theta() const { return theta_; }
  /// Unscaled velocity samples; multiply by velocity_scale() for the actual v.
  const GridField& vfield_base() const { return vfield_; }
  double velocity_scale() const { return scale_; }
  double eps() const { return scale_ * eps_base_; }
  double eps_base() const { return eps_base_; }
  const Vec& p() const { return p_; }
  Vec velocity(int node) const;
  /// Aggregate mass removed when tiny negative entries were clipped.
  double clipped_mass() const { return clipped_mass_; }

  std::string to_json(const std::string& theta_ref, const std::string& vfield_ref) const;

 private:
  friend GraphMeasure invariant_density(const HamiltonianModel&, const CellSolution&);
  friend GraphMeasure scale_measure(const GraphMeasure&, double);
  GridField theta_;
  GridField vfield_;
  double scale_ = 1.0;
  double eps_base_ = 0.0;
  Vec p_ = Vec::Zero();
  double clipped_mass_ = 0.0;
};

/// Discrete measure mu_ij on grid nodes x_i times a uniform symmetric
/// velocity box [-radius, radius]^n with an odd point count per axis (so the
/// box contains v = 0 exactly). Same velocity-scale convention as above.
class ProductMeasure {
 public:
  ProductMeasure(TorusGrid xgrid, double radius, int points_per_axis,
                 std::vector<double> weights, double eps);

  const TorusGrid& xgrid() const { return xgrid_; }
  double radius() const { return scale_ * radius_; }
  double radius_base() const { return radius_; }
  int points_per_axis() const { return mv_; }
  int num_vnodes() const;
  double velocity_scale() const { return scale_; }
  double eps() const { return scale_ * eps_base_; }
  double eps_base() const { return eps_base_; }
  const std::vector<double>& weights() const { return weights_; }
  /// j-th velocity node (row-major over axes), scale applied.
  Vec velocity(int j) const;
  Vec velocity_base(int j) const;

  std::string to_json(const std::string& weights_ref) const;

 private:
  friend ProductMeasure scale_measure(const ProductMeasure&, double);
  TorusGrid xgrid_;
  double radius_ = 1.0;
  int mv_ = 1;
  std::vector<double> weights_;
  double scale_ = 1.0;
  double eps_base_ = 0.0;
};

using Observable = std::function<double(const Vec& x, const Vec& v)>;

/// Stationary density of the drift-diffusion generated by the converged cell
/// solution: kernel of the exact transpose of the Newton linearization.
GraphMeasure invariant_density(const HamiltonianModel& model, const CellSolution& cell);

double measure_integrate(const GraphMeasure& mu, const Observable& f);
double measure_integrate(const ProductMeasure& mu, const Observable& f);

/// Max over nodal test functions phi_k of the holonomy functional
/// integral of (v . D phi_k - eps_test Lap phi_k) d mu, times the cell volume.
double holonomy_residual(const GraphMeasure& mu, double eps_test);
double holonomy_residual(const ProductMeasure& mu, double eps_test);

/// v -> lambda v, eps -> lambda eps, weights unchanged (exact in floating
/// point; see GraphMeasure).
GraphMeasure scale_measure(const GraphMeasure& mu, double lambda);
ProductMeasure scale_measure(const ProductMeasure& mu, double lambda);

/// Velocity-box radius R0 = max |D_pH(x, xi)| over grid x and |xi| <=
/// p_radius + grad_bound; sizes the holonomic LP support.
double support_radius(const HamiltonianModel& model, double p_radius, double grad_bound);

}  // namespace ergolab
