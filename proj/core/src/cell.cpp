#include "ergolab/cell.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <json.hpp>

namespace ergolab {

namespace {

Vec node_x(const TorusGrid& g, int node) {
  Vec x = Vec::Zero();
  for (int a = 0; a < g.dim(); ++a) x[a] = g.coord(node, a);
  return x;
}

Vec node_vec(const GridField& f, int node) {
  Vec v = Vec::Zero();
  for (int c = 0; c < f.arity(); ++c) v[c] = f.at(node, c);
  return v;
}

/// F_i = H(x_i, p + Du_i) - eps (Lap u)_i - c, via the stencil operators.
GridField residual_field(const HamiltonianModel& model, const Vec& p, double eps,
                         const GridField& u, double c) {
  const TorusGrid& g = u.grid();
  GridField du = gradient(u);
  GridField lap = laplacian(u);
  GridField out(g, 1);
  for (int i = 0; i < g.num_nodes(); ++i) {
    const Vec xi = p + node_vec(du, i);
    out[i] = model.eval_h(node_x(g, i), xi) - eps * lap[i] - c;
  }
  return out;
}

double grad_max(const GridField& du) {
  double m = 0.0;
  for (int i = 0; i < du.grid().num_nodes(); ++i) m = std::max(m, node_vec(du, i).norm());
  return m;
}

/// Solve the sparse system with the dimension-appropriate factorization.
Eigen::VectorXd sparse_solve(const SparseMat& a, const Eigen::VectorXd& rhs, int dim,
                             const char* who) {
  if (dim == 1) {
    Eigen::SparseLU<SparseMat> lu(a);
    if (lu.info() != Eigen::Success)
      throw NumericalError(std::string(who) + ": sparse LU factorization failed");
    return lu.solve(rhs);
  }
  Eigen::BiCGSTAB<SparseMat, Eigen::IncompleteLUT<double>> it;
  it.setTolerance(1e-13);
  it.setMaxIterations(20000);
  it.compute(a);
  Eigen::VectorXd x = it.solve(rhs);
  if (it.info() != Eigen::Success)
    throw NumericalError(std::string(who) + ": BiCGSTAB did not converge, residual " +
                         format_double(it.error()));
  return x;
}

}  // namespace

double cell_residual(const HamiltonianModel& model, const Vec& p, double eps,
                     const GridField& u, double c) {
  return max_abs(residual_field(model, p, eps, u, c));
}

double mesh_peclet(const HamiltonianModel& model, const TorusGrid& grid, const Vec& p,
                   double eps) {
  // speed bound: |D_xi H| over the a-priori gradient range |xi| <= |p| + sqrt(2 max V) + 1
  double vmax = 0.0;
  const int stride = std::max(1, grid.num_nodes() / 4096);
  for (int i = 0; i < grid.num_nodes(); i += stride)
    vmax = std::max(vmax, model.potential(node_x(grid, i)));
  const double r = p.norm() + std::sqrt(2.0 * vmax) + 1.0;
  double speed = 0.0;
  const int ndir = grid.dim() == 1 ? 2 : 8;
  for (int i = 0; i < grid.num_nodes(); i += stride) {
    const Vec x = node_x(grid, i);
    for (int d = 0; d < ndir; ++d) {
      Vec dir = Vec::Zero();
      if (grid.dim() == 1) {
        dir[0] = d == 0 ? 1.0 : -1.0;
      } else {
        const double ang = 2.0 * M_PI * d / ndir;
        dir << std::cos(ang), std::sin(ang);
      }
      speed = std::max(speed, model.eval_dxi_h(x, r * dir).norm());
    }
  }
  double h = grid.spacing(0);
  if (grid.dim() == 2) h = std::max(h, grid.spacing(1));
  return h * speed / (2.0 * eps);
}

namespace {

void enforce_peclet(const HamiltonianModel& model, const TorusGrid& grid, const Vec& p,
                    double eps) {
  const double pe = mesh_peclet(model, grid, p, eps);
  if (pe <= 2.0) return;
  // pe scales like 1/N: the smallest admissible N is N * pe / 2, rounded up
  int nmax = grid.size(0);
  if (grid.dim() == 2) nmax = std::max(nmax, grid.size(1));
  const int nmin = static_cast<int>(std::ceil(nmax * pe / 2.0));
  std::ostringstream msg;
  msg << "mesh Peclet number " << format_double(pe)
      << " exceeds 2; refine to at least N = " << nmin << " (eps = " << format_double(eps)
      << ")";
  throw PreconditionError(msg.str());
}

}  // namespace

CellSolution solve_cell(const HamiltonianModel& model, const TorusGrid& grid, const Vec& p,
                        double eps, const SolverOptions& opts) {
  opts.validate();
  if (eps <= 0) throw PreconditionError("solve_cell: eps must be > 0");
  enforce_peclet(model, grid, p, eps);
  {
    const auto rep = model.check_assumptions(p.norm() + 3.0, 1024);
    if (!rep.h1_convexity_ok)
      throw PreconditionError("solve_cell: model fails the convexity sampling check");
  }

  const int n = grid.num_nodes();
  std::vector<SparseMat> gmat;
  for (int a = 0; a < grid.dim(); ++a) gmat.push_back(gradient_matrix(grid, a));
  const SparseMat lap = laplacian_matrix(grid);

  GridField u(grid, 1);
  GridField h0(grid, 1);
  for (int i = 0; i < n; ++i) h0[i] = model.eval_h(node_x(grid, i), p);
  double c = integrate(h0);

  GridField f = residual_field(model, p, eps, u, c);
  double res = max_abs(f);
  int iter = 0;
  int stall = 0;

  while (res > opts.tol) {
    if (iter >= opts.max_iter)
      throw NumericalError("solve_cell: no convergence in " + std::to_string(opts.max_iter) +
                           " iterations, residual " + format_double(res));

    // drift at the current iterate
    GridField du = gradient(u);
    GridField b(grid, grid.dim());
    for (int i = 0; i < n; ++i) {
      const Vec dxi = model.eval_dxi_h(node_x(grid, i), p + node_vec(du, i));
      for (int a = 0; a < grid.dim(); ++a) b.at(i, a) = dxi[a];
    }

    // augmented Jacobian: columns 0..n-2 are u_1..u_{n-1}, column n-1 is c
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * (2 * grid.dim() + 3));
    auto add = [&](int row, int node_col, double val) {
      if (node_col == 0) return;  // pinned node
      trip.emplace_back(row, node_col - 1, val);
    };
    for (int a = 0; a < grid.dim(); ++a)
      for (int k = 0; k < gmat[a].outerSize(); ++k)
        for (SparseMat::InnerIterator it(gmat[a], k); it; ++it)
          add(static_cast<int>(it.row()), static_cast<int>(it.col()),
              b.at(static_cast<int>(it.row()), a) * it.value());
    for (int k = 0; k < lap.outerSize(); ++k)
      for (SparseMat::InnerIterator it(lap, k); it; ++it)
        add(static_cast<int>(it.row()), static_cast<int>(it.col()), -eps * it.value());
    for (int i = 0; i < n; ++i) trip.emplace_back(i, n - 1, -1.0);
    SparseMat jac(n, n);
    jac.setFromTriplets(trip.begin(), trip.end());

    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) rhs[i] = -f[i];
    Eigen::VectorXd delta = sparse_solve(jac, rhs, grid.dim(), "solve_cell");

    // damped line search on the residual max-norm
    double t = 1.0;
    bool accepted = false;
    GridField u_try = u;
    double c_try = c;
    for (int ls = 0; ls < 30; ++ls) {
      for (int i = 1; i < n; ++i) u_try[i] = u[i] + t * delta[i - 1];
      c_try = c + t * delta[n - 1];
      GridField f_try = residual_field(model, p, eps, u_try, c_try);
      const double res_try = max_abs(f_try);
      if (res_try < res || res_try <= opts.tol) {
        u = u_try;
        c = c_try;
        f = std::move(f_try);
        stall = res_try > (1.0 - 1e-3) * res ? stall + 1 : 0;
        res = res_try;
        accepted = true;
        break;
      }
      t *= opts.damping;
    }
    ++iter;
    if (!accepted || stall >= 5) {
      std::ostringstream msg;
      msg << "solve_cell: Newton stagnated at residual " << format_double(res) << " after "
          << iter << " iterations (eps = " << format_double(eps)
          << ", N = " << grid.size(0) << ")";
      throw NumericalError(msg.str());
    }
  }

  CellSolution sol;
  sol.p = p;
  sol.eps = eps;
  sol.u = std::move(u);
  sol.c = c;
  sol.residual_linf = res;
  sol.grad_linf = grad_max(gradient(sol.u));
  sol.iterations = iter;
  sol.method = CellMethod::newton;
  return sol;
}

CellSolution parabolic_march(const HamiltonianModel& model, const TorusGrid& grid,
                             const Vec& p, double eps, const SolverOptions& opts) {
  opts.validate();
  if (eps <= 0) throw PreconditionError("parabolic_march: eps must be > 0");
  enforce_peclet(model, grid, p, eps);

  const int n = grid.num_nodes();
  const double dt = opts.parabolic_dt;
  const long n_steps = static_cast<long>(std::ceil(opts.parabolic_T / dt));

  SparseMat m = -dt * eps * laplacian_matrix(grid);
  for (int i = 0; i < n; ++i) m.coeffRef(i, i) += 1.0;
  m.makeCompressed();
  Eigen::SparseLU<SparseMat> lu;
  std::optional<Eigen::BiCGSTAB<SparseMat, Eigen::IncompleteLUT<double>>> itsolver;
  if (grid.dim() == 1) {
    lu.compute(m);
    if (lu.info() != Eigen::Success)
      throw NumericalError("parabolic_march: LU factorization failed");
  } else {
    itsolver.emplace();
    itsolver->setTolerance(1e-13);
    itsolver->compute(m);
  }

  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  GridField wf(grid, 1);
  std::deque<double> c_hist;  // per-step -(w_next - w)/dt averaged over nodes
  double c_window = 0.0, c_window_prev = 0.0;
  bool converged = false;
  long step = 0;

  for (; step < n_steps; ++step) {
    std::copy(w.data(), w.data() + n, wf.values().begin());
    GridField dw = gradient(wf);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i)
      rhs[i] = w[i] - dt * model.eval_h(node_x(grid, i), p + node_vec(dw, i));
    Eigen::VectorXd w_next = grid.dim() == 1 ? lu.solve(rhs).eval() : itsolver->solve(rhs).eval();
    c_hist.push_back((w - w_next).mean() / dt);
    w = std::move(w_next);

    if ((step + 1) % 200 == 0) {
      // average over the trailing 10% of all steps so far
      const std::size_t win = std::max<std::size_t>(10, c_hist.size() / 10);
      while (c_hist.size() > win) c_hist.pop_front();
      std::vector<double> tail(c_hist.begin(), c_hist.end());
      c_window = pairwise_sum(tail) / static_cast<double>(tail.size());
      if (step > 400 && std::abs(c_window - c_window_prev) <= opts.tol) {
        converged = true;
        ++step;
        break;
      }
      c_window_prev = c_window;
    }
  }
  if (!converged) {
    // final-window estimate; report it in the failure
    std::ostringstream msg;
    msg << "parabolic_march: c estimate still drifting at T = " << format_double(opts.parabolic_T)
        << " (last value " << format_double(c_window) << ")";
    throw NumericalError(msg.str());
  }

  CellSolution sol;
  sol.p = p;
  sol.eps = eps;
  sol.u = GridField(grid, 1);
  for (int i = 0; i < n; ++i) sol.u[i] = w[i] - w[0];
  sol.c = c_window;
  sol.residual_linf = cell_residual(model, p, eps, sol.u, sol.c);
  sol.grad_linf = grad_max(gradient(sol.u));
  sol.iterations = static_cast<int>(std::min<long>(step, INT32_MAX));
  sol.method = CellMethod::parabolic;
  return sol;
}

HopfColeResult hopf_cole_eigenvalue(const HamiltonianModel& model, const TorusGrid& grid,
                                    double eps) {
  if (!model.is_mechanical() || model.power() != 2)
    throw PreconditionError("hopf_cole_eigenvalue: needs a mechanical q=2 model");
  if (eps <= 0) throw PreconditionError("hopf_cole_eigenvalue: eps must be > 0");

  const int n = grid.num_nodes();
  SparseMat a = 2.0 * eps * eps * laplacian_matrix(grid);
  double vmax = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = model.potential(node_x(grid, i));
    a.coeffRef(i, i) -= v;
    vmax = std::max(vmax, v);
  }
  a.makeCompressed();
  // residual floor scales with the operator norm
  const double scale = 8.0 * eps * eps * grid.dim() /
                           (grid.spacing(0) * grid.spacing(0)) +
                       vmax + 1.0;

  auto factor_shifted = [&](double sigma) {
    SparseMat shifted = a;
    for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) -= sigma;
    auto lu = std::make_unique<Eigen::SparseLU<SparseMat>>();
    lu->compute(shifted);
    if (lu->info() != Eigen::Success)
      throw NumericalError("hopf_cole_eigenvalue: shifted factorization failed");
    return lu;
  };

  // the spectrum is <= 0 (V >= 0), so a small positive shift is always safe
  double sigma = 1e-8;
  auto lu = factor_shifted(sigma);
  Eigen::VectorXd phi = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(double(n)));
  double lambda = 0.0;
  bool done = false;
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::VectorXd z = lu->solve(phi);
    if (!z.allFinite())
      throw NumericalError("hopf_cole_eigenvalue: inverse iteration breakdown");
    if (z.sum() < 0) z = -z;
    phi = z / z.norm();
    lambda = phi.dot(a * phi);
    const double res = (a * phi - lambda * phi).lpNorm<Eigen::Infinity>();
    if (res <= 1e-14 * scale) {
      done = true;
      break;
    }
    if (iter > 0 && iter % 15 == 0) {
      // Rayleigh restart: re-center the shift just above the current estimate
      sigma = lambda + 1e-8;
      lu = factor_shifted(sigma);
    }
  }
  if (!done) throw NumericalError("hopf_cole_eigenvalue: inverse iteration did not converge");
  if (phi.minCoeff() <= 0.0)
    throw NumericalError("hopf_cole_eigenvalue: eigenfunction not strictly positive");

  HopfColeResult out;
  out.eigenvalue = lambda;
  out.phi = GridField(grid, 1);
  std::copy(phi.data(), phi.data() + n, out.phi.values().begin());
  return out;
}

BernsteinReport bernstein_report(const HamiltonianModel& model, const TorusGrid& grid,
                                 const Vec& p, const std::vector<double>& eps_list,
                                 const SolverOptions& opts) {
  BernsteinReport rep;
  for (double eps : eps_list) {
    const CellSolution sol = solve_cell(model, grid, p, eps, opts);
    rep.entries.push_back({eps, sol.grad_linf});
  }
  for (std::size_t k = 1; k < rep.entries.size(); ++k) {
    const auto& prev = rep.entries[k - 1];
    const auto& cur = rep.entries[k];
    if (cur.eps < prev.eps && cur.grad_linf > 1.2 * prev.grad_linf) rep.growth_flag = true;
    if (cur.eps > prev.eps && prev.grad_linf > 1.2 * cur.grad_linf) rep.growth_flag = true;
  }
  return rep;
}

std::string CellSolution::to_json(const std::string& u_csv_ref) const {
  nlohmann::ordered_json j;
  std::vector<double> pv(static_cast<std::size_t>(u.grid().dim()));
  for (int a = 0; a < u.grid().dim(); ++a) pv[a] = p[a];
  j["p"] = pv;
  j["eps"] = eps;
  j["c"] = c;
  j["residual_linf"] = residual_linf;
  j["grad_linf"] = grad_linf;
  j["iterations"] = iterations;
  j["method"] = method == CellMethod::newton ? "newton" : "parabolic";
  if (u_csv_ref.empty())
    j["u"] = u.values();
  else
    j["u_file"] = u_csv_ref;
  return j.dump(2);
}

}  // namespace ergolab
