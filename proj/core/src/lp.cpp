#include "ergolab/lp.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "ergolab/cell.hpp"

namespace ergolab {

namespace {

Vec node_x(const TorusGrid& g, int node) {
  Vec x = Vec::Zero();
  for (int a = 0; a < g.dim(); ++a) x[a] = g.coord(node, a);
  return x;
}

double sampled_vmax(const HamiltonianModel& model) {
  const int nx = 256;
  double vmax = 0.0;
  for (int i = 0; i < (model.dim() == 1 ? nx : nx * nx); ++i) {
    Vec x = Vec::Zero();
    if (model.dim() == 1) {
      x[0] = static_cast<double>(i) / nx;
    } else {
      x[0] = static_cast<double>(i / nx) / nx;
      x[1] = static_cast<double>(i % nx) / nx;
    }
    vmax = std::max(vmax, model.potential(x));
  }
  return vmax;
}

}  // namespace

double recommended_vradius(const HamiltonianModel& model, const Vec& p) {
  const double grad_est = std::sqrt(2.0 * sampled_vmax(model));
  return 1.5 * support_radius(model, p.norm(), grad_est);
}

int HolonomicLP::num_vnodes() const {
  int m = vspec_.points_per_axis;
  if (xgrid_.dim() == 2) m *= vspec_.points_per_axis;
  return m;
}

Vec HolonomicLP::velocity(int j) const {
  const int mv = vspec_.points_per_axis;
  const double step = 2.0 * vspec_.radius / (mv - 1);
  Vec v = Vec::Zero();
  if (xgrid_.dim() == 1) {
    v[0] = -vspec_.radius + j * step;
  } else {
    v[0] = -vspec_.radius + (j / mv) * step;
    v[1] = -vspec_.radius + (j % mv) * step;
  }
  return v;
}

HolonomicLP HolonomicLP::build(const HamiltonianModel& model, const TorusGrid& xgrid,
                               const VGridSpec& vspec, const Vec& p, double eps) {
  if (eps < 0) throw ConfigError("HolonomicLP: eps must be >= 0");
  if (vspec.points_per_axis < 3 || vspec.points_per_axis % 2 == 0)
    throw ConfigError("HolonomicLP: velocity points per axis must be odd and >= 3");
  if (vspec.radius <= 0) throw ConfigError("HolonomicLP: velocity radius must be > 0");
  {
    const double grad_est = std::sqrt(2.0 * sampled_vmax(model));
    const double rmin = support_radius(model, p.norm(), grad_est);
    if (vspec.radius < rmin - 1e-12) {
      std::ostringstream msg;
      msg << "HolonomicLP: velocity radius " << format_double(vspec.radius)
          << " below the support estimate " << format_double(rmin) << "; use at least "
          << format_double(1.5 * rmin);
      throw ConfigError(msg.str());
    }
  }

  HolonomicLP lp;
  lp.xgrid_ = xgrid;
  lp.vspec_ = vspec;
  lp.eps_ = eps;
  lp.p_ = p;

  const int n_x = xgrid.num_nodes();
  const int n_v = lp.num_vnodes();
  const long n_var = static_cast<long>(n_x) * n_v;
  if (n_var > 100000) {
    std::ostringstream msg;
    msg << "HolonomicLP: " << n_var << " variables exceed the 1e5 guard; coarsen to "
        << "N_x <= " << 100000 / n_v << " at this velocity grid";
    throw ConfigError(msg.str());
  }

  lp.cost_.resize(n_var);
  for (int i = 0; i < n_x; ++i) {
    const Vec x = node_x(xgrid, i);
    for (int j = 0; j < n_v; ++j) {
      const Vec v = lp.velocity(j);
      lp.cost_[static_cast<long>(i) * n_v + j] = model.legendre(x, v).value - p.dot(v);
    }
  }
  if (!lp.cost_.allFinite()) throw NumericalError("HolonomicLP: non-finite cost entry");

  lp.a_ = Eigen::MatrixXd::Zero(n_x + 1, n_var);
  lp.rhs_ = Eigen::VectorXd::Zero(n_x + 1);
  lp.rhs_[n_x] = 1.0;
  for (int i = 0; i < n_x; ++i) {
    const int i0 = i / (xgrid.dim() == 2 ? xgrid.size(1) : 1);
    const int i1 = xgrid.dim() == 2 ? i % xgrid.size(1) : 0;
    for (int j = 0; j < n_v; ++j) {
      const long col = static_cast<long>(i) * n_v + j;
      const Vec v = lp.velocity(j);
      for (int a = 0; a < xgrid.dim(); ++a) {
        const double h = xgrid.spacing(a);
        const int kp = a == 0 ? xgrid.index_wrapped(i0 + 1, i1) : xgrid.index_wrapped(i0, i1 + 1);
        const int km = a == 0 ? xgrid.index_wrapped(i0 - 1, i1) : xgrid.index_wrapped(i0, i1 - 1);
        lp.a_(km, col) += -v[a] / (2.0 * h) - eps / (h * h);
        lp.a_(kp, col) += v[a] / (2.0 * h) - eps / (h * h);
        lp.a_(i, col) += 2.0 * eps / (h * h);
      }
      lp.a_(n_x, col) = 1.0;
    }
  }
  return lp;
}

namespace {

struct SimplexOut {
  LPStatus status = LPStatus::infeasible;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  double value = 0.0;
  long iterations = 0;
};

/// Two-phase dense tableau simplex for min c.x, A x = b, x >= 0.
/// Dantzig pricing with a permanent switch to Bland's rule after a stall, so
/// degenerate holonomy rows (rhs 0) cannot cycle.
SimplexOut dense_simplex(const Eigen::MatrixXd& a0, const Eigen::VectorXd& b0,
                         const Eigen::VectorXd& c0) {
  const int m = static_cast<int>(a0.rows());
  const int n = static_cast<int>(a0.cols());
  const int total = n + m;  // artificial column for every row

  Eigen::MatrixXd t(m, total);
  t.leftCols(n) = a0;
  t.rightCols(m) = Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd bb = b0;
  for (int i = 0; i < m; ++i)
    if (bb[i] < 0) {
      bb[i] = -bb[i];
      t.row(i) = -t.row(i);
      t(i, n + i) = 1.0;  // keep the artificial positive
      // flipping negated the identity entry; restore it and zero the mirror
    }

  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + i;

  SimplexOut out;
  const long max_iter = 5000 + 50L * m + n;
  bool bland = false;
  long stall = 0;

  auto run_phase = [&](const Eigen::VectorXd& cost, int allowed_cols) -> bool {
    // reduced costs r = cost - cost_B^T * T, objective z = cost_B . bb
    Eigen::RowVectorXd r = cost.transpose();
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
      if (cost[basis[i]] != 0.0) {
        r -= cost[basis[i]] * t.row(i);
        z += cost[basis[i]] * bb[i];
      }
    }
    while (true) {
      if (out.iterations >= max_iter) return false;
      int enter = -1;
      if (!bland) {
        double best = -1e-10;
        for (int j = 0; j < allowed_cols; ++j)
          if (r[j] < best) {
            best = r[j];
            enter = j;
          }
      } else {
        for (int j = 0; j < allowed_cols; ++j)
          if (r[j] < -1e-10) {
            enter = j;
            break;
          }
      }
      if (enter < 0) return true;  // optimal for this phase

      int leave = -1;
      double best_ratio = 0.0;
      for (int i = 0; i < m; ++i) {
        const double aij = t(i, enter);
        if (aij > 1e-11) {
          const double ratio = bb[i] / aij;
          if (leave < 0 || ratio < best_ratio - 1e-14 ||
              (ratio < best_ratio + 1e-14 && basis[i] < basis[leave]))
            leave = i, best_ratio = ratio;
        }
      }
      if (leave < 0)
        throw NumericalError("simplex: unbounded direction in a mass-constrained LP");

      // pivot
      const double piv = t(leave, enter);
      t.row(leave) /= piv;
      bb[leave] /= piv;
      for (int i = 0; i < m; ++i) {
        if (i == leave) continue;
        const double f = t(i, enter);
        if (f != 0.0) {
          t.row(i) -= f * t.row(leave);
          bb[i] -= f * bb[leave];
          if (bb[i] < 0 && bb[i] > -1e-12) bb[i] = 0.0;
        }
      }
      const double rf = r[enter];
      r -= rf * t.row(leave);
      const double dz = rf * bb[leave];  // <= 0; zero on degenerate pivots
      z += dz;
      basis[leave] = enter;
      ++out.iterations;
      if (std::abs(dz) < 1e-13) {
        if (++stall > 500) bland = true;
      } else {
        stall = 0;
      }
    }
  };

  // phase 1: drive the artificials to zero
  Eigen::VectorXd cost1 = Eigen::VectorXd::Zero(total);
  cost1.tail(m).setOnes();
  if (!run_phase(cost1, total)) {
    out.status = LPStatus::iteration_limit;
    return out;
  }
  double infeas = 0.0;
  for (int i = 0; i < m; ++i)
    if (basis[i] >= n) infeas += bb[i];
  if (infeas > 1e-9) {
    out.status = LPStatus::infeasible;
    out.value = infeas;
    return out;
  }
  // pivot still-basic artificials out where a nonzero row entry exists;
  // rows with none are redundant and keep a zero-level artificial
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n) continue;
    int enter = -1;
    for (int j = 0; j < n; ++j)
      if (std::abs(t(i, j)) > 1e-9) {
        enter = j;
        break;
      }
    if (enter < 0) continue;
    const double piv = t(i, enter);
    t.row(i) /= piv;
    bb[i] /= piv;
    for (int k = 0; k < m; ++k) {
      if (k == i) continue;
      const double f = t(k, enter);
      if (f != 0.0) {
        t.row(k) -= f * t.row(i);
        bb[k] -= f * bb[i];
      }
    }
    basis[i] = enter;
  }

  // phase 2: original objective, artificial columns barred from entering
  Eigen::VectorXd cost2 = Eigen::VectorXd::Zero(total);
  cost2.head(n) = c0;
  bland = false;
  stall = 0;
  if (!run_phase(cost2, n)) {
    out.status = LPStatus::iteration_limit;
    return out;
  }

  out.x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) out.x[basis[i]] = bb[i];
  out.value = c0.dot(out.x);

  // dual multipliers from the final basis: B^T y = c_B
  Eigen::MatrixXd bmat(m, m);
  Eigen::VectorXd cb(m);
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n) {
      bmat.col(i) = a0.col(basis[i]);
      cb[i] = c0[basis[i]];
    } else {
      bmat.col(i) = Eigen::VectorXd::Unit(m, basis[i] - n);
      cb[i] = 0.0;
    }
  }
  out.y = bmat.transpose().colPivHouseholderQr().solve(cb);
  out.status = LPStatus::optimal;
  return out;
}

}  // namespace

LPResult solve_lp(const HolonomicLP& lp) {
  SimplexOut s = dense_simplex(lp.constraints(), lp.rhs(), lp.cost());
  LPResult res;
  res.status = s.status;
  res.iterations = s.iterations;
  if (s.status != LPStatus::optimal) {
    if (s.status == LPStatus::infeasible) res.value = s.value;
    return res;
  }
  res.value = s.value;
  res.dual_certificate.assign(s.y.data(), s.y.data() + s.y.size());
  res.feasibility_residual =
      (lp.constraints() * s.x - lp.rhs()).lpNorm<Eigen::Infinity>();
  const double dual_value = lp.rhs().dot(s.y);
  res.comp_slack_gap = std::abs(s.value - dual_value) / (1.0 + std::abs(s.value));

  std::vector<double> w(s.x.data(), s.x.data() + s.x.size());
  for (double& v : w) {
    if (v < 0) {
      if (v < -1e-11) throw NumericalError("solve_lp: negative weight beyond round-off");
      v = 0.0;
    }
  }
  const double mass = pairwise_sum(w);
  for (double& v : w) v /= mass;
  res.measure.emplace(lp.xgrid(), lp.vspec().radius, lp.vspec().points_per_axis,
                      std::move(w), lp.eps());
  return res;
}

std::pair<double, double> optimal_face_extremize(const HolonomicLP& lp,
                                                 const LPResult& primal, const Vec& xi) {
  if (primal.status != LPStatus::optimal)
    throw PreconditionError("optimal_face_extremize: primal must be optimal");
  const int m0 = lp.num_constraints();
  const int n0 = lp.num_variables();
  const int n_v = lp.num_vnodes();

  Eigen::VectorXd obj = Eigen::VectorXd::Zero(n0 + 2);
  for (long col = 0; col < n0; ++col) obj[col] = lp.velocity(static_cast<int>(col % n_v)).dot(xi);

  auto solve_band = [&](double band, bool maximize) -> std::pair<bool, double> {
    Eigen::MatrixXd a(m0 + 2, n0 + 2);
    a.setZero();
    a.topLeftCorner(m0, n0) = lp.constraints();
    a.row(m0).head(n0) = lp.cost().transpose();
    a.row(m0 + 1).head(n0) = lp.cost().transpose();
    a(m0, n0) = 1.0;       // c.mu + s1 = value + band
    a(m0 + 1, n0 + 1) = -1.0;  // c.mu - s2 = value - band
    Eigen::VectorXd b(m0 + 2);
    b.head(m0) = lp.rhs();
    b[m0] = primal.value + band;
    b[m0 + 1] = primal.value - band;
    SimplexOut s = dense_simplex(a, b, maximize ? (-obj).eval() : obj);
    if (s.status != LPStatus::optimal) return {false, 0.0};
    return {true, maximize ? -s.value : s.value};
  };

  double dmin = 0.0, dmax = 0.0;
  for (double band : {1e-9, 1e-7}) {
    const auto lo = solve_band(band, false);
    const auto hi = solve_band(band, true);
    if (lo.first && hi.first) return {lo.second, hi.second};
    dmin = lo.second;
    dmax = hi.second;
  }
  (void)dmin;
  (void)dmax;
  throw NumericalError("optimal_face_extremize: face LP infeasible even with widened band");
}

LpPdeGap lp_vs_pde_gap(const HamiltonianModel& model, const Vec& p, double eps,
                       const TorusGrid& xgrid, const VGridSpec& vspec) {
  if (eps <= 0) throw PreconditionError("lp_vs_pde_gap: eps must be > 0");
  const CellSolution cell = solve_cell(model, xgrid, p, eps);
  HolonomicLP lp = HolonomicLP::build(model, xgrid, vspec, p, eps);
  LPResult res = solve_lp(lp);
  if (res.status != LPStatus::optimal)
    throw NumericalError("lp_vs_pde_gap: LP did not reach optimality");
  LpPdeGap gap;
  gap.hbar_lp = -res.value;
  gap.pde_c = cell.c;
  gap.gap = std::abs(gap.hbar_lp - gap.pde_c);
  return gap;
}

void HolonomicLP::export_text(std::ostream& os) const {
  os << "variables " << num_variables() << "\n";
  os << "constraints " << num_constraints() << "\n";
  os << "objective\n";
  for (int j = 0; j < num_variables(); ++j)
    os << j << ' ' << format_double(cost_[j]) << '\n';
  os << "matrix\n";
  for (int i = 0; i < num_constraints(); ++i)
    for (int j = 0; j < num_variables(); ++j)
      if (a_(i, j) != 0.0) os << i << ' ' << j << ' ' << format_double(a_(i, j)) << '\n';
  os << "senses\n";
  for (int i = 0; i < num_constraints(); ++i) os << "E\n";
  os << "rhs\n";
  for (int i = 0; i < num_constraints(); ++i)
    os << i << ' ' << format_double(rhs_[i]) << '\n';
}

}  // namespace ergolab
