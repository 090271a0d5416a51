#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ergolab/grid.hpp"

namespace ergolab {

/// Points, covectors and velocities live in at most two dimensions; for
/// dim == 1 only component 0 is meaningful and the second must stay 0.
using Vec = Eigen::Vector2d;
using Mat = Eigen::Matrix2d;

enum class Family {
  free,               // H = |xi|^2 / 2
  mechanical_power,   // H = |xi|^q / q - V(x), even q >= 2
  drifted_quadratic,  // H = |xi|^2 / 2 + b(x).xi - V(x)   (1D)
  anisotropic_2d,     // H = (a1 xi1^2 + a2 xi2^2)/2 - V(x1,x2)
  custom_tabulated,   // H = |xi|^2 / 2 - V(x), V from a CSV table
};

std::string family_name(Family f);
Family family_from_name(const std::string& name);

struct LagrangianValue {
  double value = 0.0;  // L(x,v)
  Vec argmax_xi = Vec::Zero();
  Vec dval_dv = Vec::Zero();   // D_v L(x,v) = argmax_xi
  Mat d2val_dv2 = Mat::Zero(); // D_vv L(x,v), SPD for (H1) models
};

struct AssumptionReport {
  bool h1_convexity_ok = false;
  bool h1_superlinearity_ok = false;
  bool h2_growth_ok = false;
  double min_eig_dxixi_h = 0.0;
  /// (shell radius, min over sampled x of H^2/2 + D_xH . xi)
  std::vector<std::pair<double, double>> h2_min_over_shells;
  double box_radius = 0.0;
  int samples = 0;
  std::uint64_t seed = 0;
};

/// A catalog Hamiltonian on the flat torus. Immutable after construction;
/// all evaluators are pure and thread-safe.
class HamiltonianModel {
 public:
  static HamiltonianModel from_json(const std::string& json_text);
  static HamiltonianModel make_free(int dim);
  /// |xi|^q/q - amplitude*(1 - cos 2 pi x) (summed over axes in 2D, halved).
  static HamiltonianModel make_mechanical(int dim, int q, double amplitude);
  static HamiltonianModel make_drifted_quadratic(double drift_amplitude, double amplitude);
  static HamiltonianModel make_anisotropic_2d(double a1, double a2, double amplitude);
  static HamiltonianModel make_tabulated(GridField potential_table);

  Family family() const { return family_; }
  int dim() const { return dim_; }
  int power() const { return q_; }
  bool is_mechanical() const;  // H = |xi|^q/q - V form (free counts, V = 0)

  double eval_h(const Vec& x, const Vec& xi) const;
  Vec eval_dxi_h(const Vec& x, const Vec& xi) const;
  Vec eval_dx_h(const Vec& x, const Vec& xi) const;
  Mat eval_d2xi_h(const Vec& x, const Vec& xi) const;

  double potential(const Vec& x) const;     // V(x), normalized so min V = 0
  Vec potential_grad(const Vec& x) const;   // DV(x)
  /// Second x-derivative d^2 V / dx_a^2 (used for the Bernstein constants).
  double potential_d2(const Vec& x, int axis) const;
  double drift(const Vec& x) const;         // b(x), drifted_quadratic only

  LagrangianValue legendre(const Vec& x, const Vec& v) const;

  AssumptionReport check_assumptions(double box_radius, int samples,
                                     std::uint64_t seed = 0) const;

  std::string to_json() const;

 private:
  HamiltonianModel() = default;
  void wrap_check(const Vec& x, const Vec& xi) const;

  Family family_ = Family::free;
  int dim_ = 1;
  int q_ = 2;
  double amplitude_ = 1.0;
  double drift_amplitude_ = 0.0;
  double a1_ = 1.0, a2_ = 1.0;
  GridField table_;       // custom_tabulated potential
  GridField table_grad_;  // central-difference derivative of the table
  bool has_table_ = false;
};

}  // namespace ergolab
