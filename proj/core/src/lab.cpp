#include "ergolab/lab.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ergolab {

namespace {

Vec node_x(const TorusGrid& g, int node) {
  Vec x = Vec::Zero();
  for (int a = 0; a < g.dim(); ++a) x[a] = g.coord(node, a);
  return x;
}

}  // namespace

DerivativeReport c_prime(const HamiltonianModel& model, const CellSolution& cell,
                         const GraphMeasure& mu, const SolverOptions& opts) {
  DerivativeReport rep;
  rep.eps = cell.eps;
  rep.c = cell.c;

  GridField lap_u = laplacian(cell.u);
  rep.c_prime_formula_laplacian = -inner(mu.theta(), lap_u);

  const Vec p = cell.p;
  rep.c_prime_formula_lagrangian =
      measure_integrate(mu,
                        [&](const Vec& x, const Vec& v) {
                          const Vec dvl = model.legendre(x, v).dval_dv;
                          return (-v).dot(dvl - p);
                        }) /
      cell.eps;
  rep.discrepancy_forms =
      std::abs(rep.c_prime_formula_laplacian - rep.c_prime_formula_lagrangian);
  if (rep.discrepancy_forms > 1e-8)
    throw NumericalError("c_prime: the two derivative forms disagree by " +
                         format_double(rep.discrepancy_forms) +
                         " — the adjoint pairing is broken");

  rep.fd_step = std::max(1e-3, cell.eps / 100.0);
  const TorusGrid& grid = cell.u.grid();
  const double cp = solve_cell(model, grid, p, cell.eps + rep.fd_step, opts).c;
  const double cm = solve_cell(model, grid, p, cell.eps - rep.fd_step, opts).c;
  rep.c_prime_fd = (cp - cm) / (2.0 * rep.fd_step);
  rep.discrepancy_fd = std::abs(rep.c_prime_formula_laplacian - rep.c_prime_fd);
  return rep;
}

std::string derivative_csv(const std::vector<DerivativeReport>& rows) {
  std::ostringstream os;
  os << "eps,c,c_prime_lap,c_prime_lag,c_prime_fd,gap_forms,gap_fd\n";
  for (const auto& r : rows)
    os << format_double(r.eps) << ',' << format_double(r.c) << ','
       << format_double(r.c_prime_formula_laplacian) << ','
       << format_double(r.c_prime_formula_lagrangian) << ','
       << format_double(r.c_prime_fd) << ',' << format_double(r.discrepancy_forms) << ','
       << format_double(r.discrepancy_fd) << '\n';
  return os.str();
}

std::vector<SemiconvexEntry> semiconvexity_probe(const HamiltonianModel& model,
                                                 const TorusGrid& grid, const Vec& p,
                                                 double eps,
                                                 const std::vector<double>& eta_list,
                                                 const SolverOptions& opts) {
  for (double eta : eta_list)
    if (eta <= 0 || eps - eta <= 0 || eps + eta >= 1)
      throw PreconditionError("semiconvexity_probe: need eps +- eta inside (0,1)");

  const CellSolution center = solve_cell(model, grid, p, eps, opts);
  const GraphMeasure mu = invariant_density(model, center);
  const double coeff = measure_integrate(mu, [&](const Vec& x, const Vec& v) {
    const Mat dvv = model.legendre(x, v).d2val_dv2;
    return v.dot(dvv * v);
  });

  std::vector<SemiconvexEntry> out;
  for (double eta : eta_list) {
    SemiconvexEntry e;
    e.eta = eta;
    const double cp = solve_cell(model, grid, p, eps + eta, opts).c;
    const double cm = solve_cell(model, grid, p, eps - eta, opts).c;
    e.second_difference = cp + cm - 2.0 * center.c;
    e.bound = -coeff * eta * eta / (eps * eps);
    if (e.second_difference < e.bound - 1e-8)
      throw NumericalError("semiconvexity_probe: second difference " +
                           format_double(e.second_difference) + " violates the bound " +
                           format_double(e.bound));
    out.push_back(e);
  }
  return out;
}

std::string semiconvexity_csv(const std::vector<SemiconvexEntry>& rows) {
  std::ostringstream os;
  os << "eta,second_difference,bound\n";
  for (const auto& r : rows)
    os << format_double(r.eta) << ',' << format_double(r.second_difference) << ','
       << format_double(r.bound) << '\n';
  return os.str();
}

RateFit rate_probe(const HamiltonianModel& model, const TorusGrid& grid,
                   const std::vector<double>& eps_samples,
                   std::optional<double> c0_reference, const SolverOptions& opts) {
  for (std::size_t k = 0; k < eps_samples.size(); ++k) {
    if (eps_samples[k] <= 0 || eps_samples[k] >= 1)
      throw PreconditionError("rate_probe: eps samples must lie in (0,1)");
    if (k > 0 && eps_samples[k] >= eps_samples[k - 1])
      throw PreconditionError("rate_probe: eps samples must be strictly decreasing");
  }

  RateFit fit;
  fit.eps_samples = eps_samples;
  if (c0_reference) {
    fit.c0_reference = *c0_reference;
  } else {
    fit.c0_reference = inviscid_oracle(model, 0.0).hbar;
  }

  for (double eps : eps_samples)
    fit.c_values.push_back(solve_cell(model, grid, Vec::Zero(), eps, opts).c);

  fit.slope_bound = 0.0;
  for (std::size_t k = 0; k < eps_samples.size(); ++k)
    fit.slope_bound = std::max(
        fit.slope_bound, std::abs(fit.c_values[k] - fit.c0_reference) / eps_samples[k]);

  if (model.is_mechanical()) {
    const double tol = 1e-6;
    fit.sandwich_ok = true;
    for (std::size_t k = 0; k < eps_samples.size(); ++k) {
      if (fit.c_values[k] > fit.c0_reference + tol) fit.sandwich_ok = false;
      if (fit.c0_reference > fit.c_values[k] + fit.slope_bound * eps_samples[k] + tol)
        fit.sandwich_ok = false;
    }
  }
  return fit;
}

std::string rate_csv(const RateFit& fit) {
  std::ostringstream os;
  os << "eps,c,c0,ratio\n";
  for (std::size_t k = 0; k < fit.eps_samples.size(); ++k)
    os << format_double(fit.eps_samples[k]) << ',' << format_double(fit.c_values[k]) << ','
       << format_double(fit.c0_reference) << ','
       << format_double(std::abs(fit.c_values[k] - fit.c0_reference) / fit.eps_samples[k])
       << '\n';
  return os.str();
}

GradReport grad_hbar_eps(const HamiltonianModel& model, const TorusGrid& grid, const Vec& p,
                         double eps, const SolverOptions& opts) {
  const CellSolution cell = solve_cell(model, grid, p, eps, opts);
  const GraphMeasure mu = invariant_density(model, cell);

  GradReport rep;
  for (int a = 0; a < grid.dim(); ++a)
    rep.gradient[a] =
        measure_integrate(mu, [a](const Vec&, const Vec& v) { return v[a]; });

  const double hp = 1e-4;
  for (int a = 0; a < grid.dim(); ++a) {
    Vec pp = p, pm = p;
    pp[a] += hp;
    pm[a] -= hp;
    rep.fd_gradient[a] = (solve_cell(model, grid, pp, eps, opts).c -
                          solve_cell(model, grid, pm, eps, opts).c) /
                         (2.0 * hp);
  }
  rep.gap = (rep.gradient - rep.fd_gradient).lpNorm<Eigen::Infinity>();
  return rep;
}

namespace {

/// Adaptive Simpson on [a,b] with absolute tolerance.
template <class F>
double simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 40);
}

}  // namespace

InviscidValue inviscid_oracle(const HamiltonianModel& model, double p) {
  if (model.dim() != 1 || !model.is_mechanical() || model.power() != 2)
    throw PreconditionError("inviscid_oracle: needs a 1D mechanical q=2 model");

  auto vpot = [&](double x) {
    Vec xv = Vec::Zero();
    xv[0] = x;
    return model.potential(xv);
  };

  InviscidValue out;
  out.flat_halfwidth =
      adaptive_simpson([&](double x) { return std::sqrt(2.0 * vpot(x)); }, 0.0, 1.0, 1e-11);

  const double ap = std::abs(p);
  if (ap <= out.flat_halfwidth) {
    out.hbar = 0.0;
    out.dhbar_dp = 0.0;
    return out;
  }

  // action F(E) = integral of sqrt(2(E+V)); strictly increasing, F(0) = p*
  auto action = [&](double e) {
    return adaptive_simpson([&](double x) { return std::sqrt(2.0 * (e + vpot(x))); }, 0.0,
                            1.0, 1e-11);
  };
  auto action_deriv = [&](double e) {
    return adaptive_simpson(
        [&](double x) { return 1.0 / std::sqrt(2.0 * (e + vpot(x))); }, 0.0, 1.0, 1e-11);
  };

  double lo = 0.0, hi = 1.0;
  for (int k = 0; k < 200 && action(hi) < ap; ++k) hi *= 2.0;
  if (action(hi) < ap) throw NumericalError("inviscid_oracle: root bracketing failed");
  double e = 0.5 * (lo + hi);
  for (int k = 0; k < 200; ++k) {
    const double fe = action(e) - ap;
    if (fe > 0)
      hi = e;
    else
      lo = e;
    const double de = fe / action_deriv(e);
    double next = e - de;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);  // fall back to bisection
    if (std::abs(next - e) <= 1e-12 * (1.0 + std::abs(e)) && std::abs(fe) <= 1e-10) {
      e = next;
      break;
    }
    e = next;
  }
  out.hbar = e;
  out.dhbar_dp = (p >= 0 ? 1.0 : -1.0) / action_deriv(e);
  return out;
}

OneSidedReport one_sided_dhbar_inviscid(const HamiltonianModel& model,
                                        const TorusGrid& xgrid, const VGridSpec& vspec,
                                        const Vec& p, const Vec& xi) {
  HolonomicLP lp = HolonomicLP::build(model, xgrid, vspec, p, 0.0);
  LPResult primal = solve_lp(lp);
  if (primal.status != LPStatus::optimal)
    throw NumericalError("one_sided_dhbar_inviscid: primal LP did not reach optimality");
  OneSidedReport rep;
  std::tie(rep.dminus, rep.dplus) = optimal_face_extremize(lp, primal, xi);

  if (model.dim() == 1 && model.is_mechanical() && model.power() == 2) {
    const InviscidValue iv = inviscid_oracle(model, p[0]);
    if (std::abs(std::abs(p[0]) - iv.flat_halfwidth) > 1e-6)
      rep.oracle_dhbar = iv.dhbar_dp * xi[0];
  }
  return rep;
}

HessianBound hessian_integral_bound(const HamiltonianModel& model, const CellSolution& cell,
                                    const GraphMeasure& mu) {
  const TorusGrid& g = cell.u.grid();
  const int n = g.num_nodes();
  const int dim = g.dim();

  // Frobenius norm squared of the central-difference Hessian of u
  GridField hess2(g, 1);
  const GridField& u = cell.u;
  for (int i = 0; i < n; ++i) {
    const int i0 = i / (dim == 2 ? g.size(1) : 1);
    const int i1 = dim == 2 ? i % g.size(1) : 0;
    double s = 0.0;
    for (int a = 0; a < dim; ++a) {
      const double h = g.spacing(a);
      const int ip = a == 0 ? g.index_wrapped(i0 + 1, i1) : g.index_wrapped(i0, i1 + 1);
      const int im = a == 0 ? g.index_wrapped(i0 - 1, i1) : g.index_wrapped(i0, i1 - 1);
      const double d2 = (u[ip] - 2.0 * u[i] + u[im]) / (h * h);
      s += d2 * d2;
    }
    if (dim == 2) {
      const double h0 = g.spacing(0), h1 = g.spacing(1);
      const double cross = (u[g.index_wrapped(i0 + 1, i1 + 1)] -
                            u[g.index_wrapped(i0 + 1, i1 - 1)] -
                            u[g.index_wrapped(i0 - 1, i1 + 1)] +
                            u[g.index_wrapped(i0 - 1, i1 - 1)]) /
                           (4.0 * h0 * h1);
      s += 2.0 * cross * cross;  // symmetric off-diagonal pair
    }
    hess2[i] = s;
  }

  HessianBound out;
  out.lhs = inner(mu.theta(), hess2);

  // sampled constants over the grid and the Bernstein ball |xi| <= |p| + grad
  const double ball = cell.p.norm() + cell.grad_linf + 0.1;
  const int stride = std::max(1, n / 512);
  const int ndir = dim == 1 ? 2 : 16;
  const int nrad = 6;
  double gamma = std::numeric_limits<double>::infinity();
  double big_c_xx = 0.0, big_c_xxi = 0.0;
  const double dx = 1e-5;
  for (int i = 0; i < n; i += stride) {
    const Vec x = node_x(g, i);
    for (int rs = 1; rs <= nrad; ++rs) {
      const double r = ball * rs / nrad;
      for (int d = 0; d < ndir; ++d) {
        Vec dir = Vec::Zero();
        if (dim == 1) {
          dir[0] = d == 0 ? 1.0 : -1.0;
        } else {
          const double ang = 2.0 * M_PI * d / ndir;
          dir << std::cos(ang), std::sin(ang);
        }
        const Vec xi = r * dir;
        const Mat d2 = model.eval_d2xi_h(x, xi);
        gamma = std::min(gamma, dim == 1 ? d2(0, 0)
                                         : d2.selfadjointView<Eigen::Lower>()
                                               .eigenvalues()
                                               .minCoeff());
        for (int a = 0; a < dim; ++a) {
          Vec xp = x, xm = x;
          xp[a] += dx;
          xm[a] -= dx;
          const double dxx =
              (model.eval_dx_h(xp, xi)[a] - model.eval_dx_h(xm, xi)[a]) / (2.0 * dx);
          big_c_xx = std::max(big_c_xx, std::abs(dxx));
          const Vec dxxi =
              (model.eval_dxi_h(xp, xi) - model.eval_dxi_h(xm, xi)) / (2.0 * dx);
          big_c_xxi = std::max(big_c_xxi, dxxi.squaredNorm());
        }
      }
    }
  }
  if (!(gamma > 0))
    throw NumericalError("hessian_integral_bound: sampled gamma is not positive");
  out.gamma = gamma;
  out.big_c = big_c_xx + (2.0 / gamma) * big_c_xxi;
  out.rhs = out.big_c * dim / gamma;
  if (out.lhs > out.rhs + 1e-8)
    throw NumericalError("hessian_integral_bound: lhs " + format_double(out.lhs) +
                         " exceeds rhs " + format_double(out.rhs));
  return out;
}

}  // namespace ergolab
