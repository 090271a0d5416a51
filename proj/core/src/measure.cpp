#include "ergolab/measure.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/SparseLU>
#include <json.hpp>

namespace ergolab {

namespace {

Vec node_x(const TorusGrid& g, int node) {
  Vec x = Vec::Zero();
  for (int a = 0; a < g.dim(); ++a) x[a] = g.coord(node, a);
  return x;
}

}  // namespace

GraphMeasure::GraphMeasure(GridField theta, GridField vfield, double eps, const Vec& p)
    : theta_(std::move(theta)), vfield_(std::move(vfield)), eps_base_(eps), p_(p) {
  if (theta_.grid() != vfield_.grid())
    throw DomainError("GraphMeasure: theta and vfield grids differ");
  if (!theta_.is_scalar()) throw DomainError("GraphMeasure: theta must be scalar");
  if (vfield_.arity() != theta_.grid().dim())
    throw DomainError("GraphMeasure: vfield arity must equal dim");
  for (double t : theta_.values())
    if (t < -1e-12) throw DomainError("GraphMeasure: negative density entry");
  if (std::abs(integrate(theta_) - 1.0) > 1e-12)
    throw DomainError("GraphMeasure: density mass is not 1");
}

Vec GraphMeasure::velocity(int node) const {
  Vec v = Vec::Zero();
  for (int c = 0; c < vfield_.arity(); ++c) v[c] = scale_ * vfield_.at(node, c);
  return v;
}

ProductMeasure::ProductMeasure(TorusGrid xgrid, double radius, int points_per_axis,
                               std::vector<double> weights, double eps)
    : xgrid_(xgrid), radius_(radius), mv_(points_per_axis), weights_(std::move(weights)),
      eps_base_(eps) {
  if (mv_ < 3 || mv_ % 2 == 0)
    throw ConfigError("ProductMeasure: points_per_axis must be odd and >= 3");
  if (radius_ <= 0) throw ConfigError("ProductMeasure: radius must be > 0");
  if (static_cast<int>(weights_.size()) != xgrid_.num_nodes() * num_vnodes())
    throw ConfigError("ProductMeasure: weight count mismatch");
  double mass = 0.0;
  for (double w : weights_) {
    if (w < 0) throw DomainError("ProductMeasure: negative weight");
    mass += w;
  }
  if (std::abs(pairwise_sum(weights_) - 1.0) > 1e-12)
    throw DomainError("ProductMeasure: weights do not sum to 1");
  (void)mass;
}

int ProductMeasure::num_vnodes() const {
  int m = mv_;
  if (xgrid_.dim() == 2) m *= mv_;
  return m;
}

Vec ProductMeasure::velocity_base(int j) const {
  const double step = 2.0 * radius_ / (mv_ - 1);
  Vec v = Vec::Zero();
  if (xgrid_.dim() == 1) {
    v[0] = -radius_ + j * step;
  } else {
    v[0] = -radius_ + (j / mv_) * step;
    v[1] = -radius_ + (j % mv_) * step;
  }
  return v;
}

Vec ProductMeasure::velocity(int j) const { return scale_ * velocity_base(j); }

GraphMeasure invariant_density(const HamiltonianModel& model, const CellSolution& cell) {
  if (cell.eps <= 0) throw PreconditionError("invariant_density: eps must be > 0");
  const TorusGrid& g = cell.u.grid();
  const int n = g.num_nodes();

  GridField du = gradient(cell.u);
  GridField b(g, g.dim());
  for (int i = 0; i < n; ++i) {
    Vec grad = Vec::Zero();
    for (int a = 0; a < g.dim(); ++a) grad[a] = du.at(i, a);
    const Vec dxi = model.eval_dxi_h(node_x(g, i), cell.p + grad);
    for (int a = 0; a < g.dim(); ++a) b.at(i, a) = dxi[a];
  }

  // A = L^T where L is exactly the Newton linearization b.grad - eps Lap
  SparseMat l = -cell.eps * laplacian_matrix(g);
  for (int a = 0; a < g.dim(); ++a) {
    SparseMat grad_a = gradient_matrix(g, a);
    SparseMat diag(n, n);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(n);
    for (int i = 0; i < n; ++i) trip.emplace_back(i, i, b.at(i, a));
    diag.setFromTriplets(trip.begin(), trip.end());
    l += diag * grad_a;
  }
  SparseMat a = SparseMat(l.transpose());

  // kernel by shifted inverse iteration; the shift keeps the factor regular
  SparseMat shifted = a;
  for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) -= 1e-14;
  shifted.makeCompressed();
  Eigen::SparseLU<SparseMat> lu(shifted);
  if (lu.info() != Eigen::Success)
    throw NumericalError("invariant_density: factorization of the adjoint failed");

  const double vol = g.cell_volume();
  auto kernel_vector = [&](const Eigen::VectorXd& start) {
    Eigen::VectorXd th = start / start.norm();
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_th = th;
    for (int iter = 0; iter < 200; ++iter) {
      Eigen::VectorXd z = lu.solve(th);
      if (!z.allFinite())
        throw NumericalError("invariant_density: inverse iteration breakdown");
      th = z / z.norm();
      if (th.sum() < 0) th = -th;
      const double res = vol * (a * th).lpNorm<Eigen::Infinity>() / th.lpNorm<Eigen::Infinity>();
      if (res < best) {
        best = res;
        best_th = th;
      }
      if (res <= 1e-13) break;
    }
    if (best > 1e-10)
      throw NumericalError("invariant_density: kernel residual stuck at " +
                           format_double(best));
    return best_th;
  };

  Eigen::VectorXd th1 = kernel_vector(Eigen::VectorXd::Ones(n));
  {
    // second start: detect a multi-dimensional kernel
    Eigen::VectorXd alt(n);
    std::uint64_t s = 0x9e3779b97f4a7c15ull;
    for (int i = 0; i < n; ++i) {
      s ^= s << 13;
      s ^= s >> 7;
      s ^= s << 17;
      alt[i] = 0.5 + (s >> 11) * (1.0 / (1ull << 53));
    }
    Eigen::VectorXd th2 = kernel_vector(alt);
    const double align = std::abs(th1.dot(th2)) / (th1.norm() * th2.norm());
    if (align < 1.0 - 1e-8)
      throw NumericalError("invariant_density: kernel is not one-dimensional");
  }

  GridField theta(g, 1);
  std::copy(th1.data(), th1.data() + n, theta.values().begin());
  const double mass0 = integrate(theta);
  if (mass0 <= 0) throw NumericalError("invariant_density: nonpositive total mass");
  for (double& t : theta.values()) t /= mass0;

  double clipped = 0.0;
  for (double& t : theta.values()) {
    if (t < 0) {
      clipped += -t * vol;
      if (t >= -1e-12) t = 0.0;
    }
  }
  if (clipped > 1e-10)
    throw NumericalError("invariant_density: negative mass " + format_double(clipped) +
                         " indicates under-resolution");
  const double mass1 = integrate(theta);
  for (double& t : theta.values()) t /= mass1;

  GraphMeasure mu(std::move(theta), std::move(b), cell.eps, cell.p);
  mu.clipped_mass_ = clipped;
  return mu;
}

double measure_integrate(const GraphMeasure& mu, const Observable& f) {
  const TorusGrid& g = mu.grid();
  GridField prod(g, 1);
  for (int i = 0; i < g.num_nodes(); ++i) {
    const double fi = f(node_x(g, i), mu.velocity(i));
    if (!std::isfinite(fi))
      throw DomainError("measure_integrate: observable not finite at a support point");
    prod[i] = fi * mu.theta()[i];
  }
  return integrate(prod);
}

double measure_integrate(const ProductMeasure& mu, const Observable& f) {
  const TorusGrid& g = mu.xgrid();
  const int nv = mu.num_vnodes();
  std::vector<double> terms(mu.weights().size());
  for (int i = 0; i < g.num_nodes(); ++i) {
    const Vec x = node_x(g, i);
    for (int j = 0; j < nv; ++j) {
      const double fi = f(x, mu.velocity(j));
      if (!std::isfinite(fi))
        throw DomainError("measure_integrate: observable not finite at a support point");
      terms[static_cast<std::size_t>(i) * nv + j] = fi * mu.weights()[static_cast<std::size_t>(i) * nv + j];
    }
  }
  return pairwise_sum(terms);
}

namespace {

/// max_k | sum over support of (v . D phi_k - eps Lap phi_k) | * cell volume,
/// for a graph measure given by unscaled (theta, v, eps).
double graph_residual_base(const GridField& theta, const GridField& v, double eps) {
  const TorusGrid& g = theta.grid();
  GridField flux(g, g.dim());
  for (int i = 0; i < g.num_nodes(); ++i)
    for (int a = 0; a < g.dim(); ++a) flux.at(i, a) = theta[i] * v.at(i, a);
  GridField y = divergence(flux);
  GridField lap_th = laplacian(theta);
  double m = 0.0;
  for (int i = 0; i < g.num_nodes(); ++i)
    m = std::max(m, std::abs(-y[i] - eps * lap_th[i]));
  return m * g.cell_volume();
}

}  // namespace

double holonomy_residual(const GraphMeasure& mu, double eps_test) {
  if (eps_test == mu.eps()) {
    // common path: factor the velocity scale out bitwise
    return mu.velocity_scale() * graph_residual_base(mu.theta(), mu.vfield_base(), mu.eps_base());
  }
  GridField v(mu.grid(), mu.grid().dim());
  for (int i = 0; i < mu.grid().num_nodes(); ++i) {
    const Vec vi = mu.velocity(i);
    for (int a = 0; a < mu.grid().dim(); ++a) v.at(i, a) = vi[a];
  }
  return graph_residual_base(mu.theta(), v, eps_test);
}

namespace {

double product_residual_base(const ProductMeasure& mu, double eps, bool scaled_velocities) {
  const TorusGrid& g = mu.xgrid();
  const int n = g.num_nodes();
  const int nv = mu.num_vnodes();
  std::vector<double> res(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const int i0 = i / (g.dim() == 2 ? g.size(1) : 1);
    const int i1 = g.dim() == 2 ? i % g.size(1) : 0;
    for (int j = 0; j < nv; ++j) {
      const double w = mu.weights()[static_cast<std::size_t>(i) * nv + j];
      if (w == 0.0) continue;
      const Vec v = scaled_velocities ? mu.velocity(j) : mu.velocity_base(j);
      for (int a = 0; a < g.dim(); ++a) {
        const double h = g.spacing(a);
        const int kp = a == 0 ? g.index_wrapped(i0 + 1, i1) : g.index_wrapped(i0, i1 + 1);
        const int km = a == 0 ? g.index_wrapped(i0 - 1, i1) : g.index_wrapped(i0, i1 - 1);
        res[km] += w * (-v[a] / (2.0 * h) - eps / (h * h));
        res[kp] += w * (v[a] / (2.0 * h) - eps / (h * h));
        res[i] += w * 2.0 * eps / (h * h);
      }
    }
  }
  double m = 0.0;
  for (double r : res) m = std::max(m, std::abs(r));
  return m;
}

}  // namespace

double holonomy_residual(const ProductMeasure& mu, double eps_test) {
  if (eps_test == mu.eps())
    return mu.velocity_scale() * product_residual_base(mu, mu.eps_base(), false);
  return product_residual_base(mu, eps_test, true);
}

GraphMeasure scale_measure(const GraphMeasure& mu, double lambda) {
  if (lambda <= 0) throw PreconditionError("scale_measure: lambda must be > 0");
  GraphMeasure out = mu;
  out.scale_ = mu.scale_ * lambda;
  return out;
}

ProductMeasure scale_measure(const ProductMeasure& mu, double lambda) {
  if (lambda <= 0) throw PreconditionError("scale_measure: lambda must be > 0");
  ProductMeasure out = mu;
  out.scale_ = mu.scale_ * lambda;
  return out;
}

double support_radius(const HamiltonianModel& model, double p_radius, double grad_bound) {
  if (grad_bound < 0) throw PreconditionError("support_radius: grad_bound must be >= 0");
  const double r = p_radius + grad_bound;
  const int nx = 256;
  const int ndir = model.dim() == 1 ? 2 : 64;
  double r0 = 0.0;
  for (int i = 0; i < (model.dim() == 1 ? nx : nx * nx); ++i) {
    Vec x = Vec::Zero();
    if (model.dim() == 1) {
      x[0] = static_cast<double>(i) / nx;
    } else {
      x[0] = static_cast<double>(i / nx) / nx;
      x[1] = static_cast<double>(i % nx) / nx;
    }
    for (int d = 0; d < ndir; ++d) {
      Vec dir = Vec::Zero();
      if (model.dim() == 1) {
        dir[0] = d == 0 ? 1.0 : -1.0;
      } else {
        const double ang = 2.0 * M_PI * d / ndir;
        dir << std::cos(ang), std::sin(ang);
      }
      r0 = std::max(r0, model.eval_dxi_h(x, r * dir).norm());
    }
  }
  return r0;
}

std::string GraphMeasure::to_json(const std::string& theta_ref,
                                  const std::string& vfield_ref) const {
  nlohmann::ordered_json j;
  j["eps"] = eps();
  std::vector<double> pv(static_cast<std::size_t>(grid().dim()));
  for (int a = 0; a < grid().dim(); ++a) pv[a] = p_[a];
  j["p"] = pv;
  j["velocity_scale"] = scale_;
  j["clipped_mass"] = clipped_mass_;
  j["theta"] = theta_ref;
  j["vfield"] = vfield_ref;
  return j.dump(2);
}

std::string ProductMeasure::to_json(const std::string& weights_ref) const {
  nlohmann::ordered_json j;
  j["eps"] = eps();
  j["xgrid"]["dim"] = xgrid_.dim();
  j["xgrid"]["sizes"] = xgrid_.dim() == 2
                            ? std::vector<int>{xgrid_.size(0), xgrid_.size(1)}
                            : std::vector<int>{xgrid_.size(0)};
  j["vgrid"]["radius"] = radius();
  j["vgrid"]["points_per_axis"] = mv_;
  j["velocity_scale"] = scale_;
  j["weights"] = weights_ref;
  return j.dump(2);
}

}  // namespace ergolab
