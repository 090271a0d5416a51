#include "ergolab/accept.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "ergolab/cell.hpp"
#include "ergolab/grid.hpp"
#include "ergolab/lab.hpp"
#include "ergolab/lp.hpp"
#include "ergolab/measure.hpp"
#include "ergolab/model.hpp"

namespace ergolab {

namespace {

namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Battery {
  fs::path dir;
  std::vector<CheckResult> results;
  std::ostringstream notes;

  void add(const std::string& name, double value, double tol) {
    results.push_back({name, value <= tol, value, tol});
  }
  void fail(const std::string& name, double tol, const std::string& why) {
    results.push_back({name, false, kNaN, tol});
    notes << name << ": " << why << '\n';
  }
  void write(const std::string& file, const std::string& content) const {
    std::ofstream os(dir / file, std::ios::binary);
    os << content;
  }
};

Vec vec1(double x) {
  Vec v = Vec::Zero();
  v[0] = x;
  return v;
}

// Criterion 1: free Hamiltonian solves are exact and the measure is uniform.
void check_free_exactness(Battery& bat) {
  const char* name = "free_exactness";
  try {
    const HamiltonianModel model = HamiltonianModel::make_free(1);
    const TorusGrid grid = TorusGrid::make_1d(128);
    double worst = 0.0;
    for (double eps : {0.05, 0.1, 0.5}) {
      for (double p : {0.0, 0.7}) {
        const CellSolution cell = solve_cell(model, grid, vec1(p), eps);
        worst = std::max(worst, std::abs(cell.c - 0.5 * p * p) / 1e-10);
        worst = std::max(worst, cell.residual_linf / 1e-10);
        const GraphMeasure mu = invariant_density(model, cell);
        for (double t : mu.theta().values())
          worst = std::max(worst, std::abs(t - 1.0) / 1e-12);
      }
    }
    bat.add(name, worst, 1.0);
  } catch (const std::exception& e) {
    bat.fail(name, 1.0, e.what());
  }
}

// Criterion 2: Newton's c against the eigenvalue oracle on the same grid,
// and theta against the squared eigenfunction.
void check_hopf_cole(Battery& bat) {
  const char* name = "hopf_cole_oracle";
  try {
    const HamiltonianModel model = HamiltonianModel::make_mechanical(1, 2, 1.0);
    const TorusGrid grid = TorusGrid::make_1d(512);
    double worst = 0.0;
    std::ostringstream csv;
    csv << "eps,c_newton,eigenvalue,gap_c,gap_theta\n";
    for (double eps : {0.05, 0.1, 0.2, 0.5}) {
      const CellSolution cell = solve_cell(model, grid, Vec::Zero(), eps);
      const HopfColeResult hc = hopf_cole_eigenvalue(model, grid, eps);
      const double gap_c = std::abs(cell.c - hc.eigenvalue);

      const GraphMeasure mu = invariant_density(model, cell);
      GridField phi2(grid, 1);
      for (std::size_t k = 0; k < phi2.size(); ++k) phi2[k] = hc.phi[k] * hc.phi[k];
      const double mass = integrate(phi2);
      double gap_theta = 0.0;
      for (std::size_t k = 0; k < phi2.size(); ++k)
        gap_theta = std::max(gap_theta, std::abs(mu.theta()[k] - phi2[k] / mass));

      csv << format_double(eps) << ',' << format_double(cell.c) << ','
          << format_double(hc.eigenvalue) << ',' << format_double(gap_c) << ','
          << format_double(gap_theta) << '\n';
      worst = std::max({worst, gap_c / 1e-8, gap_theta / 1e-7});
    }
    bat.write("hopf_cole.csv", csv.str());
    bat.add(name, worst, 1.0);
  } catch (const std::exception& e) {
    bat.fail(name, 1.0, e.what());
  }
}

struct SweepEntry {
  std::string model_name;
  HamiltonianModel model;
  CellSolution cell;
  GraphMeasure mu;
  DerivativeReport report;
};

std::vector<SweepEntry> run_sweep(Battery& bat) {
  std::vector<SweepEntry> out;
  const TorusGrid grid = TorusGrid::make_1d(256);
  std::vector<std::pair<std::string, HamiltonianModel>> models;
  models.emplace_back("pendulum", HamiltonianModel::make_mechanical(1, 2, 1.0));
  models.emplace_back("drifted", HamiltonianModel::make_drifted_quadratic(1.0, 1.0));
  std::vector<DerivativeReport> rows;
  for (auto& [mname, model] : models) {
    for (double eps : {0.1, 0.2, 0.5}) {
      for (double p : {0.0, 0.4, 0.8}) {
        CellSolution cell = solve_cell(model, grid, vec1(p), eps);
        GraphMeasure mu = invariant_density(model, cell);
        DerivativeReport rep = c_prime(model, cell, mu);
        rows.push_back(rep);
        out.push_back({mname, model, std::move(cell), std::move(mu), rep});
      }
    }
  }
  {
    const HamiltonianModel model = HamiltonianModel::make_free(1);
    for (double p : {0.0, 0.7}) {
      CellSolution cell = solve_cell(model, grid, vec1(p), 0.1);
      GraphMeasure mu = invariant_density(model, cell);
      DerivativeReport rep = c_prime(model, cell, mu);
      rows.push_back(rep);
      out.push_back({"free", model, std::move(cell), std::move(mu), rep});
    }
  }
  bat.write("derivative_sweep.csv", derivative_csv(rows));
  return out;
}

// Criterion 3: the two c'(eps) integral forms agree to round-off everywhere.
void check_forms_identity(Battery& bat, const std::vector<SweepEntry>& sweep) {
  double worst = 0.0;
  for (const auto& e : sweep) worst = std::max(worst, e.report.discrepancy_forms);
  bat.add("derivative_forms_identity", worst, 1e-10);
}

// Criterion 7: c'(eps) <= 0 for every mechanical sample.
void check_sign_law(Battery& bat, const std::vector<SweepEntry>& sweep) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& e : sweep)
    if (e.model.is_mechanical())
      worst = std::max(worst, e.report.c_prime_formula_laplacian);
  bat.add("mechanical_sign_law", worst, 1e-10);
}

// Criterion 4: FD cross-check of c'(eps) and its second-order shrink rate.
void check_fd_consistency(Battery& bat) {
  const char* name = "derivative_fd_consistency";
  try {
    const HamiltonianModel model = HamiltonianModel::make_mechanical(1, 2, 1.0);
    const TorusGrid grid = TorusGrid::make_1d(512);
    const double eps = 0.2;
    const CellSolution cell = solve_cell(model, grid, Vec::Zero(), eps);
    const GraphMeasure mu = invariant_density(model, cell);
    GridField lap_u = laplacian(cell.u);
    const double formula = -inner(mu.theta(), lap_u);
    auto fd = [&](double h) {
      return (solve_cell(model, grid, Vec::Zero(), eps + h).c -
              solve_cell(model, grid, Vec::Zero(), eps - h).c) /
             (2.0 * h);
    };
    const double gap1 = std::abs(formula - fd(1e-3));
    const double gap2 = std::abs(formula - fd(5e-4));
    const double ratio = gap1 / gap2;
    const double ratio_norm = ratio < 2.5 ? 2.5 / ratio : (ratio > 6.0 ? ratio / 6.0 : 1.0);
    bat.notes << name << ": gap(1e-3) = " << format_double(gap1)
              << ", gap(5e-4) = " << format_double(gap2)
              << ", ratio = " << format_double(ratio) << '\n';
    bat.add(name, std::max(gap1 / 1e-5, ratio_norm), 1.0);
  } catch (const std::exception& e) {
    bat.fail(name, 1.0, e.what());
  }
}

// Criterion 5: second differences in eps against the curvature bound.
void check_semiconvexity(Battery& bat) {
  const char* name = "semiconvexity_bound";
  try {
    const HamiltonianModel model = HamiltonianModel::make_mechanical(1, 2, 1.0);
    const TorusGrid grid = TorusGrid::make_1d(512);
    const auto rows =
        semiconvexity_probe(model, grid, Vec::Zero(), 0.2, {0.05, 0.025, 0.0125});
    bat.write("semiconvexity.csv", semiconvexity_csv(rows));
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& r : rows)
      worst = std::max(worst, r.bound - r.second_difference);
    bat.add(name, worst, 1e-8);
  } catch (const std::exception& e) {
    bat.fail(name, 1e-8, e.what());
  }
}

// Criterion 6: vanishing-viscosity sandwich with the fitted slope + 10%.
void check_rate(Battery& bat) {
  const char* name = "viscosity_rate_sandwich";
  try {
    const HamiltonianModel model = HamiltonianModel::make_mechanical(1, 2, 1.0);
    const TorusGrid grid = TorusGrid::make_1d(1024);
    std::vector<double> eps;
    for (int k = 3; k <= 7; ++k) eps.push_back(std::ldexp(1.0, -k));
    const RateFit fit = rate_probe(model, grid, eps);
    bat.write("rate.csv", rate_csv(fit));

    const double cprime_bound = 1.1 * fit.slope_bound;  // fitted slope + 10%
    double violation = -std::numeric_limits<double>::infinity();
    bool ratios_nonincreasing = true;
    double prev_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < eps.size(); ++k) {
      violation = std::max(violation, fit.c_values[k] - fit.c0_reference);
      violation = std::max(violation, fit.c0_reference - fit.c_values[k] -
                                          cprime_bound * eps[k]);
      const double ratio = std::abs(fit.c_values[k] - fit.c0_reference) / eps[k];
      if (ratio > prev_ratio + 1e-12) ratios_nonincreasing = false;
      prev_ratio = ratio;
      if (!std::isfinite(ratio)) violation = kNaN;
    }
    bat.notes << name << ": max ratio = " << format_double(fit.slope_bound)
              << ", non-increasing trend = " << (ratios_nonincreasing ? "yes" : "no")
              << '\n';
    bat.add(name, violation, 1e-6);
  } catch (const std::exception& e) {
    bat.fail(name, 1e-6, e.what());
  }
}

// Criterion 8: rotation vector against the FD gradient of p -> c.
void check_gradient_formula(Battery& bat) {
  const char* name = "gradient_formula";
  try {
    const HamiltonianModel model = HamiltonianModel::make_mechanical(1, 2, 1.0);
    const TorusGrid grid = TorusGrid::make_1d(512);
    double worst = 0.0;
    std::ostringstream csv;
    csv << "p,gradient,fd_gradient,gap\n";
    for (double p : {0.0, 0.4, 0.8}) {
      const GradReport rep = grad_hbar_eps(model, grid, vec1(p), 0.2);
      csv << format_double(p) << ',' << format_double(rep.gradient[0]) << ','
          << format_double(rep.fd_gradient[0]) << ',' << format_double(rep.gap) << '\n';
      worst = std::max(worst, rep.gap);
    }
    bat.write("gradient.csv", csv.str());
    bat.add(name, worst, 1e-4);
  } catch (const std::exception& e) {
    bat.fail(name, 1e-4, e.what());
  }
}

// Criterion 9: adjoint-kernel residuals and exact velocity rescaling.
void check_holonomy_scaling(Battery& bat, const std::vector<SweepEntry>& sweep) {
  const char* name = "holonomy_and_scaling";
  try {
    double worst = 0.0;
    for (const auto& e : sweep) {
      const double base = holonomy_residual(e.mu, e.mu.eps());
      worst = std::max(worst, base / 1e-10);
      for (double lam : {0.5, 2.0, 10.0}) {
        const GraphMeasure scaled = scale_measure(e.mu, lam);
        const double got = holonomy_residual(scaled, lam * e.mu.eps());
        const double want = lam * base;
        const double rel = std::abs(got - want) / std::max(std::abs(want), 1e-300);
        worst = std::max(worst, rel / 1e-12);
      }
    }
    bat.add(name, worst, 1.0);
  } catch (const std::exception& e) {
    bat.fail(name, 1.0, e.what());
  }
}

// Criterion 10: the holonomic LP agrees with the PDE value and improves
// under refinement.
void check_lp_crosscheck(Battery& bat) {
  const char* name = "lp_pde_crosscheck";
  try {
    const HamiltonianModel model = HamiltonianModel::make_mechanical(1, 2, 1.0);
    const LpPdeGap base = lp_vs_pde_gap(model, Vec::Zero(), 0.2, TorusGrid::make_1d(64),
                                        {3.0, 65});
    const LpPdeGap fine = lp_vs_pde_gap(model, Vec::Zero(), 0.2, TorusGrid::make_1d(128),
                                        {3.0, 129});
    std::ostringstream csv;
    csv << "nx,mv,hbar_lp,pde_c,gap\n";
    csv << "64,65," << format_double(base.hbar_lp) << ',' << format_double(base.pde_c)
        << ',' << format_double(base.gap) << '\n';
    csv << "128,129," << format_double(fine.hbar_lp) << ',' << format_double(fine.pde_c)
        << ',' << format_double(fine.gap) << '\n';
    bat.write("lp_compare.csv", csv.str());
    const double worst = std::max(base.gap / 5e-2, fine.gap < base.gap ? 0.0 : 2.0);
    bat.add(name, worst, 1.0);
  } catch (const std::exception& e) {
    bat.fail(name, 1.0, e.what());
  }
}

// Criterion 11: one-sided derivatives from the eps = 0 optimal face.
void check_one_sided(Battery& bat) {
  const char* name = "one_sided_derivatives";
  try {
    const HamiltonianModel model = HamiltonianModel::make_mechanical(1, 2, 1.0);
    const TorusGrid xgrid = TorusGrid::make_1d(64);
    double worst = 0.0;
    std::ostringstream csv;
    csv << "p,dminus,dplus,oracle\n";

    const OneSidedReport flat =
        one_sided_dhbar_inviscid(model, xgrid, {3.0, 65}, vec1(0.5), vec1(1.0));
    worst = std::max({worst, std::abs(flat.dminus) / 1e-6, std::abs(flat.dplus) / 1e-6});
    if (flat.dminus > flat.dplus + 1e-8) worst = std::max(worst, 2.0);
    csv << "0.5," << format_double(flat.dminus) << ',' << format_double(flat.dplus)
        << ',' << format_double(flat.oracle_dhbar.value_or(0.0)) << '\n';

    const OneSidedReport steep =
        one_sided_dhbar_inviscid(model, xgrid, {4.5, 91}, vec1(2.0), vec1(1.0));
    if (!steep.oracle_dhbar)
      throw NumericalError("missing quadrature cross-check at p = 2");
    worst = std::max({worst, std::abs(steep.dminus - *steep.oracle_dhbar) / 2e-2,
                      std::abs(steep.dplus - *steep.oracle_dhbar) / 2e-2});
    if (steep.dminus > steep.dplus + 1e-8) worst = std::max(worst, 2.0);
    csv << "2," << format_double(steep.dminus) << ',' << format_double(steep.dplus)
        << ',' << format_double(*steep.oracle_dhbar) << '\n';

    bat.write("one_sided.csv", csv.str());
    bat.add(name, worst, 1.0);
  } catch (const std::exception& e) {
    bat.fail(name, 1.0, e.what());
  }
}

// Criterion 12: uniform gradient bound, Hessian-integral bound, and the
// |c'| <= sqrt(C n / gamma) chain.
void check_uniform_bounds(Battery& bat) {
  const char* name = "uniform_bounds";
  try {
    const HamiltonianModel model = HamiltonianModel::make_mechanical(1, 2, 1.0);
    const TorusGrid grid = TorusGrid::make_1d(512);
    const double grad_cap = 1.1 * std::sqrt(2.0 * 2.0);  // 1.1 max sqrt(2V), max V = 2
    double worst = 0.0;
    std::ostringstream csv;
    csv << "eps,grad_linf,hessian_lhs,hessian_rhs,c_prime\n";
    for (double eps : {0.4, 0.2, 0.1, 0.05}) {
      const CellSolution cell = solve_cell(model, grid, Vec::Zero(), eps);
      const GraphMeasure mu = invariant_density(model, cell);
      const HessianBound hb = hessian_integral_bound(model, cell, mu);
      GridField lap_u = laplacian(cell.u);
      const double cp = -inner(mu.theta(), lap_u);
      csv << format_double(eps) << ',' << format_double(cell.grad_linf) << ','
          << format_double(hb.lhs) << ',' << format_double(hb.rhs) << ','
          << format_double(cp) << '\n';
      worst = std::max({worst, cell.grad_linf / grad_cap, hb.lhs / hb.rhs,
                        std::abs(cp) / std::sqrt(hb.rhs)});
    }
    bat.write("uniform_bounds.csv", csv.str());
    bat.add(name, worst, 1.0);
  } catch (const std::exception& e) {
    bat.fail(name, 1.0, e.what());
  }
}

// Criterion 13: midpoint convexity of p -> c at fixed eps.
void check_p_convexity(Battery& bat) {
  const char* name = "p_convexity";
  try {
    const HamiltonianModel model = HamiltonianModel::make_mechanical(1, 2, 1.0);
    const TorusGrid grid = TorusGrid::make_1d(512);
    std::map<double, double> c;
    for (double p : {-1.0, -0.5, 0.0, 0.5, 1.0})
      c[p] = solve_cell(model, grid, vec1(p), 0.2).c;
    double worst = -std::numeric_limits<double>::infinity();
    for (double p : {-0.5, 0.0, 0.5})
      worst = std::max(worst, 2.0 * c[p] - c[p - 0.5] - c[p + 0.5]);
    bat.add(name, worst, 1e-8);
  } catch (const std::exception& e) {
    bat.fail(name, 1e-8, e.what());
  }
}

Battery run_battery(const fs::path& dir) {
  Battery bat;
  bat.dir = dir;
  fs::create_directories(dir);
  check_free_exactness(bat);
  check_hopf_cole(bat);
  std::vector<SweepEntry> sweep;
  try {
    sweep = run_sweep(bat);
    check_forms_identity(bat, sweep);
    check_fd_consistency(bat);
    check_semiconvexity(bat);
    check_rate(bat);
    check_sign_law(bat, sweep);
    check_gradient_formula(bat);
    check_holonomy_scaling(bat, sweep);
  } catch (const std::exception& e) {
    for (const char* n : {"derivative_forms_identity", "derivative_fd_consistency",
                          "semiconvexity_bound", "viscosity_rate_sandwich",
                          "mechanical_sign_law", "gradient_formula",
                          "holonomy_and_scaling"})
      bat.fail(n, 1.0, e.what());
  }
  check_lp_crosscheck(bat);
  check_one_sided(bat);
  check_uniform_bounds(bat);
  check_p_convexity(bat);

  std::ostringstream lines;
  for (const auto& r : bat.results) lines << check_line(r) << '\n';
  bat.write("checks.txt", lines.str());
  bat.write("notes.txt", bat.notes.str());
  return bat;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  std::ostringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  return sa.str() == sb.str();
}

}  // namespace

std::string check_line(const CheckResult& r) {
  std::ostringstream os;
  os << "CHECK " << r.name << ' ' << (r.pass ? "PASS" : "FAIL") << ' '
     << format_double(r.value) << ' ' << format_double(r.tolerance);
  return os.str();
}

std::vector<CheckResult> run_acceptance(const std::string& out_dir, std::ostream& log) {
  const fs::path root(out_dir);
  Battery run1 = run_battery(root / "run1");
  Battery run2 = run_battery(root / "run2");

  // criterion 14: every artifact and every check value byte-identical
  double mismatches = 0.0;
  for (const auto& entry : fs::directory_iterator(root / "run1")) {
    const fs::path other = root / "run2" / entry.path().filename();
    if (!fs::exists(other) || !same_bytes(entry.path(), other)) mismatches += 1.0;
  }
  for (std::size_t k = 0; k < run1.results.size(); ++k) {
    const auto& a = run1.results[k];
    const auto& b = run2.results[k];
    if (a.name != b.name || a.pass != b.pass ||
        format_double(a.value) != format_double(b.value))
      mismatches += 1.0;
  }

  std::vector<CheckResult> all = run1.results;
  all.push_back({"determinism", mismatches == 0.0, mismatches, 0.0});
  for (const auto& r : all) log << check_line(r) << '\n';
  return all;
}

}  // namespace ergolab
