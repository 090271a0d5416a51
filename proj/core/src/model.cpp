#include "ergolab/model.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

namespace ergolab {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap01(double x) {
  double w = x - std::floor(x);
  return w == 1.0 ? 0.0 : w;
}
}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::free: return "free";
    case Family::mechanical_power: return "mechanical_power";
    case Family::drifted_quadratic: return "drifted_quadratic";
    case Family::anisotropic_2d: return "anisotropic_2d";
    case Family::custom_tabulated: return "custom_tabulated";
  }
  throw ConfigError("unknown family enum");
}

Family family_from_name(const std::string& name) {
  if (name == "free") return Family::free;
  if (name == "mechanical_power") return Family::mechanical_power;
  if (name == "drifted_quadratic") return Family::drifted_quadratic;
  if (name == "anisotropic_2d") return Family::anisotropic_2d;
  if (name == "custom_tabulated") return Family::custom_tabulated;
  throw ConfigError("unknown Hamiltonian family: " + name);
}

namespace {
void require_dim(int dim) {
  if (dim < 1 || dim > 2) throw ConfigError("model: dim must be 1 or 2");
}
}  // namespace

HamiltonianModel HamiltonianModel::make_free(int dim) {
  require_dim(dim);
  HamiltonianModel m;
  m.family_ = Family::free;
  m.dim_ = dim;
  return m;
}

HamiltonianModel HamiltonianModel::make_mechanical(int dim, int q, double amplitude) {
  require_dim(dim);
  if (q < 2 || q % 2 != 0)
    throw ConfigError("mechanical_power: q must be an even integer >= 2");
  HamiltonianModel m;
  m.family_ = Family::mechanical_power;
  m.dim_ = dim;
  m.q_ = q;
  m.amplitude_ = amplitude;
  return m;
}

HamiltonianModel HamiltonianModel::make_drifted_quadratic(double drift_amplitude,
                                                          double amplitude) {
  HamiltonianModel m;
  m.family_ = Family::drifted_quadratic;
  m.dim_ = 1;
  m.amplitude_ = amplitude;
  m.drift_amplitude_ = drift_amplitude;
  return m;
}

HamiltonianModel HamiltonianModel::make_anisotropic_2d(double a1, double a2,
                                                       double amplitude) {
  if (a1 <= 0 || a2 <= 0) throw ConfigError("anisotropic_2d: a1, a2 must be positive");
  HamiltonianModel m;
  m.family_ = Family::anisotropic_2d;
  m.dim_ = 2;
  m.a1_ = a1;
  m.a2_ = a2;
  m.amplitude_ = amplitude;
  return m;
}

HamiltonianModel HamiltonianModel::make_tabulated(GridField table) {
  if (!table.is_scalar()) throw ConfigError("custom_tabulated: scalar table required");
  HamiltonianModel m;
  m.family_ = Family::custom_tabulated;
  m.dim_ = table.grid().dim();
  // normalize so min V = 0
  double mn = table[0];
  for (double v : table.values()) mn = std::min(mn, v);
  for (double& v : table.values()) v -= mn;
  m.table_grad_ = gradient(table);
  m.table_ = std::move(table);
  m.has_table_ = true;
  return m;
}

bool HamiltonianModel::is_mechanical() const {
  return family_ == Family::free || family_ == Family::mechanical_power ||
         family_ == Family::custom_tabulated;
}

void HamiltonianModel::wrap_check(const Vec& x, const Vec& xi) const {
  for (int a = 0; a < dim_; ++a)
    if (!std::isfinite(x[a]) || !std::isfinite(xi[a]))
      throw DomainError("Hamiltonian evaluation: non-finite input");
}

double HamiltonianModel::potential(const Vec& x) const {
  switch (family_) {
    case Family::free:
      return 0.0;
    case Family::mechanical_power:
    case Family::drifted_quadratic: {
      double v = 0.0;
      for (int a = 0; a < dim_; ++a) v += amplitude_ * (1.0 - std::cos(kTwoPi * x[a]));
      return dim_ == 2 ? 0.5 * v : v;
    }
    case Family::anisotropic_2d:
      return 0.5 * amplitude_ *
             ((1.0 - std::cos(kTwoPi * x[0])) + (1.0 - std::cos(kTwoPi * x[1])));
    case Family::custom_tabulated: {
      // periodic multilinear interpolation of the table
      const TorusGrid& g = table_.grid();
      if (dim_ == 1) {
        const double t = wrap01(x[0]) * g.size(0);
        const int i = static_cast<int>(std::floor(t));
        const double f = t - i;
        return (1 - f) * table_[g.wrap(i, 0)] + f * table_[g.wrap(i + 1, 0)];
      }
      const double tx = wrap01(x[0]) * g.size(0), ty = wrap01(x[1]) * g.size(1);
      const int i = static_cast<int>(std::floor(tx)), j = static_cast<int>(std::floor(ty));
      const double fx = tx - i, fy = ty - j;
      auto at = [&](int ii, int jj) { return table_[g.index_wrapped(ii, jj)]; };
      return (1 - fx) * ((1 - fy) * at(i, j) + fy * at(i, j + 1)) +
             fx * ((1 - fy) * at(i + 1, j) + fy * at(i + 1, j + 1));
    }
  }
  throw ConfigError("unknown family");
}

Vec HamiltonianModel::potential_grad(const Vec& x) const {
  Vec g = Vec::Zero();
  switch (family_) {
    case Family::free:
      break;
    case Family::mechanical_power:
    case Family::drifted_quadratic: {
      const double s = dim_ == 2 ? 0.5 : 1.0;
      for (int a = 0; a < dim_; ++a)
        g[a] = s * amplitude_ * kTwoPi * std::sin(kTwoPi * x[a]);
      break;
    }
    case Family::anisotropic_2d:
      for (int a = 0; a < 2; ++a)
        g[a] = 0.5 * amplitude_ * kTwoPi * std::sin(kTwoPi * x[a]);
      break;
    case Family::custom_tabulated: {
      const TorusGrid& gr = table_.grid();
      if (dim_ == 1) {
        const double t = wrap01(x[0]) * gr.size(0);
        const int i = static_cast<int>(std::floor(t));
        const double f = t - i;
        g[0] = (1 - f) * table_grad_.at(gr.wrap(i, 0), 0) +
               f * table_grad_.at(gr.wrap(i + 1, 0), 0);
      } else {
        const double tx = wrap01(x[0]) * gr.size(0), ty = wrap01(x[1]) * gr.size(1);
        const int i = static_cast<int>(std::floor(tx)),
                  j = static_cast<int>(std::floor(ty));
        const double fx = tx - i, fy = ty - j;
        for (int a = 0; a < 2; ++a) {
          auto at = [&](int ii, int jj) { return table_grad_.at(gr.index_wrapped(ii, jj), a); };
          g[a] = (1 - fx) * ((1 - fy) * at(i, j) + fy * at(i, j + 1)) +
                 fx * ((1 - fy) * at(i + 1, j) + fy * at(i + 1, j + 1));
        }
      }
      break;
    }
  }
  return g;
}

double HamiltonianModel::potential_d2(const Vec& x, int axis) const {
  switch (family_) {
    case Family::free:
      return 0.0;
    case Family::mechanical_power:
    case Family::drifted_quadratic: {
      const double s = dim_ == 2 ? 0.5 : 1.0;
      return s * amplitude_ * kTwoPi * kTwoPi * std::cos(kTwoPi * x[axis]);
    }
    case Family::anisotropic_2d:
      return 0.5 * amplitude_ * kTwoPi * kTwoPi * std::cos(kTwoPi * x[axis]);
    case Family::custom_tabulated: {
      // central second difference of the table at the nearest node
      const TorusGrid& g = table_.grid();
      const double h = g.spacing(axis);
      const int i0 = static_cast<int>(std::lround(wrap01(x[0]) * g.size(0))) % g.size(0);
      const int j0 = dim_ == 2
                         ? static_cast<int>(std::lround(wrap01(x[1]) * g.size(1))) % g.size(1)
                         : 0;
      auto at = [&](int ii, int jj) { return table_[g.index_wrapped(ii, jj)]; };
      if (axis == 0)
        return (at(i0 + 1, j0) - 2 * at(i0, j0) + at(i0 - 1, j0)) / (h * h);
      return (at(i0, j0 + 1) - 2 * at(i0, j0) + at(i0, j0 - 1)) / (h * h);
    }
  }
  throw ConfigError("unknown family");
}

double HamiltonianModel::drift(const Vec& x) const {
  if (family_ != Family::drifted_quadratic) return 0.0;
  return drift_amplitude_ * std::sin(kTwoPi * x[0]);
}

double HamiltonianModel::eval_h(const Vec& x, const Vec& xi) const {
  wrap_check(x, xi);
  switch (family_) {
    case Family::free:
      return 0.5 * xi.squaredNorm();
    case Family::mechanical_power: {
      const double r2 = xi.squaredNorm();
      const double kin = q_ == 2 ? 0.5 * r2 : std::pow(r2, q_ / 2.0) / q_;
      return kin - potential(x);
    }
    case Family::drifted_quadratic:
      return 0.5 * xi[0] * xi[0] + drift(x) * xi[0] - potential(x);
    case Family::anisotropic_2d:
      return 0.5 * (a1_ * xi[0] * xi[0] + a2_ * xi[1] * xi[1]) - potential(x);
    case Family::custom_tabulated:
      return 0.5 * xi.squaredNorm() - potential(x);
  }
  throw ConfigError("unknown family");
}

Vec HamiltonianModel::eval_dxi_h(const Vec& x, const Vec& xi) const {
  wrap_check(x, xi);
  switch (family_) {
    case Family::free:
    case Family::custom_tabulated:
      return xi;
    case Family::mechanical_power: {
      if (q_ == 2) return xi;
      const double r2 = xi.squaredNorm();
      return std::pow(r2, (q_ - 2) / 2.0) * xi;  // |xi|^(q-2) xi
    }
    case Family::drifted_quadratic:
      return Vec(xi[0] + drift(x), 0.0);
    case Family::anisotropic_2d:
      return Vec(a1_ * xi[0], a2_ * xi[1]);
  }
  throw ConfigError("unknown family");
}

Vec HamiltonianModel::eval_dx_h(const Vec& x, const Vec& xi) const {
  wrap_check(x, xi);
  if (family_ == Family::drifted_quadratic) {
    const double db = drift_amplitude_ * kTwoPi * std::cos(kTwoPi * x[0]);
    return Vec(db * xi[0], 0.0) - potential_grad(x);
  }
  return -potential_grad(x);
}

Mat HamiltonianModel::eval_d2xi_h(const Vec& x, const Vec& xi) const {
  wrap_check(x, xi);
  switch (family_) {
    case Family::free:
    case Family::custom_tabulated:
    case Family::drifted_quadratic:
      return Mat::Identity();
    case Family::mechanical_power: {
      if (q_ == 2) return Mat::Identity();
      const double r2 = xi.squaredNorm();
      Mat m = std::pow(r2, (q_ - 2) / 2.0) * Mat::Identity();
      if (r2 > 0)
        m += (q_ - 2) * std::pow(r2, (q_ - 4) / 2.0) * (xi * xi.transpose());
      return m;
    }
    case Family::anisotropic_2d: {
      Mat m = Mat::Zero();
      m(0, 0) = a1_;
      m(1, 1) = a2_;
      return m;
    }
  }
  throw ConfigError("unknown family");
}

LagrangianValue HamiltonianModel::legendre(const Vec& x, const Vec& v) const {
  wrap_check(x, v);
  LagrangianValue out;
  switch (family_) {
    case Family::free:
    case Family::custom_tabulated:
      out.argmax_xi = v;
      out.value = 0.5 * v.squaredNorm() + potential(x);
      out.dval_dv = v;
      out.d2val_dv2 = Mat::Identity();
      return out;
    case Family::mechanical_power: {
      if (q_ == 2) {
        out.argmax_xi = v;
        out.value = 0.5 * v.squaredNorm() + potential(x);
        out.dval_dv = v;
        out.d2val_dv2 = Mat::Identity();
        return out;
      }
      // |xi|^{q-2} xi = v has the closed-form root xi = v |v|^{(2-q)/(q-1)}.
      const double vn = v.norm();
      Vec xi = Vec::Zero();
      if (vn > 0.0) xi = v * (std::pow(vn, 1.0 / (q_ - 1.0)) / vn);
      out.argmax_xi = xi;
      out.value = v.dot(xi) - eval_h(x, xi);
      out.dval_dv = xi;
      Mat hess = eval_d2xi_h(x, xi);
      // regularize: D_xixi H degenerates at xi = 0 for q > 2
      for (int a = 0; a < dim_; ++a) hess(a, a) += 1e-12;
      if (dim_ == 1) {
        out.d2val_dv2 = Mat::Zero();
        out.d2val_dv2(0, 0) = 1.0 / hess(0, 0);
        out.d2val_dv2(1, 1) = 1.0;
      } else {
        out.d2val_dv2 = hess.inverse();
      }
      return out;
    }
    case Family::drifted_quadratic: {
      const double b = drift(x);
      out.argmax_xi = Vec(v[0] - b, 0.0);
      out.value = 0.5 * (v[0] - b) * (v[0] - b) + potential(x);
      out.dval_dv = out.argmax_xi;
      out.d2val_dv2 = Mat::Identity();
      return out;
    }
    case Family::anisotropic_2d: {
      out.argmax_xi = Vec(v[0] / a1_, v[1] / a2_);
      out.value = 0.5 * (v[0] * v[0] / a1_ + v[1] * v[1] / a2_) + potential(x);
      out.dval_dv = out.argmax_xi;
      Mat m = Mat::Zero();
      m(0, 0) = 1.0 / a1_;
      m(1, 1) = 1.0 / a2_;
      out.d2val_dv2 = m;
      return out;
    }
  }

  throw ConfigError("legendre: unknown family");
}

AssumptionReport HamiltonianModel::check_assumptions(double box_radius, int samples,
                                                     std::uint64_t seed) const {
  if (box_radius <= 0) throw ConfigError("check_assumptions: box_radius must be > 0");
  if (samples < 1000) throw ConfigError("check_assumptions: need samples >= 1000");
  AssumptionReport rep;
  rep.box_radius = box_radius;
  rep.samples = samples;
  rep.seed = seed;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const int shells = 8;
  const int per_shell = samples / shells;
  rep.min_eig_dxixi_h = std::numeric_limits<double>::infinity();
  std::vector<double> superlin(shells, std::numeric_limits<double>::infinity());

  for (int s = 0; s < shells; ++s) {
    const double r = box_radius * (s + 1) / shells;
    double h2_min = std::numeric_limits<double>::infinity();
    for (int k = 0; k < per_shell; ++k) {
      Vec x = Vec::Zero(), dir = Vec::Zero();
      for (int a = 0; a < dim_; ++a) x[a] = unif(rng);
      if (dim_ == 1) {
        dir[0] = unif(rng) < 0.5 ? -1.0 : 1.0;
      } else {
        const double ang = kTwoPi * unif(rng);
        dir = Vec(std::cos(ang), std::sin(ang));
      }
      const Vec xi = r * dir;
      const double h = eval_h(x, xi);
      const Vec dxh = eval_dx_h(x, xi);
      h2_min = std::min(h2_min, 0.5 * h * h + dxh.dot(xi));
      superlin[s] = std::min(superlin[s], h / r);
      const Mat hess = eval_d2xi_h(x, xi);
      double mineig;
      if (dim_ == 1) {
        mineig = hess(0, 0);
      } else {
        Eigen::SelfAdjointEigenSolver<Mat> es(hess);
        mineig = es.eigenvalues().minCoeff();
      }
      rep.min_eig_dxixi_h = std::min(rep.min_eig_dxixi_h, mineig);
    }
    rep.h2_min_over_shells.emplace_back(r, h2_min);
  }

  rep.h1_convexity_ok = rep.min_eig_dxixi_h > 0.0;
  rep.h1_superlinearity_ok = true;
  rep.h2_growth_ok = true;
  for (int s = shells / 2; s + 1 < shells; ++s) {
    if (superlin[s + 1] <= superlin[s]) rep.h1_superlinearity_ok = false;
    if (rep.h2_min_over_shells[s + 1].second <= rep.h2_min_over_shells[s].second)
      rep.h2_growth_ok = false;
  }
  return rep;
}

HamiltonianModel HamiltonianModel::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model json: ") + e.what());
  }
  const Family fam = family_from_name(j.at("family").get<std::string>());
  const int dim = j.value("dim", 1);
  const auto params = j.value("params", nlohmann::json::object());
  auto get = [&](const char* key, double dflt) { return params.value(key, dflt); };
  switch (fam) {
    case Family::free:
      return make_free(dim);
    case Family::mechanical_power:
      return make_mechanical(dim, static_cast<int>(get("q", 2)), get("amplitude", 1.0));
    case Family::drifted_quadratic:
      return make_drifted_quadratic(get("drift_amplitude", 1.0), get("amplitude", 1.0));
    case Family::anisotropic_2d:
      return make_anisotropic_2d(get("a1", 1.0), get("a2", 1.0), get("amplitude", 1.0));
    case Family::custom_tabulated: {
      const std::string path = params.at("potential_csv").get<std::string>();
      std::ifstream is(path);
      if (!is) throw ConfigError("custom_tabulated: cannot open " + path);
      // CSV of (x1[,x2],value) rows on a uniform grid
      std::vector<std::array<double, 3>> rows;
      std::string line;
      while (std::getline(is, line)) {
        if (line.empty()) continue;
        for (char& c : line)
          if (c == ',') c = ' ';
        std::istringstream ls(line);
        std::array<double, 3> row{0, 0, 0};
        if (dim == 1) {
          if (!(ls >> row[0] >> row[2])) throw ConfigError("potential csv: bad row");
        } else {
          if (!(ls >> row[0] >> row[1] >> row[2])) throw ConfigError("potential csv: bad row");
        }
        rows.push_back(row);
      }
      if (rows.empty()) throw ConfigError("potential csv: empty");
      if (dim == 1) {
        const int n = static_cast<int>(rows.size());
        GridField table(TorusGrid::make_1d(n), 1);
        for (const auto& r : rows) {
          const int i = static_cast<int>(std::lround(wrap01(r[0]) * n)) % n;
          table[i] = r[2];
        }
        return make_tabulated(std::move(table));
      }
      const int n = static_cast<int>(std::lround(std::sqrt(double(rows.size()))));
      if (n * n != static_cast<int>(rows.size()))
        throw ConfigError("potential csv: 2D table must be square");
      GridField table(TorusGrid::make_2d(n, n), 1);
      for (const auto& r : rows) {
        const int i = static_cast<int>(std::lround(wrap01(r[0]) * n)) % n;
        const int jj = static_cast<int>(std::lround(wrap01(r[1]) * n)) % n;
        table[table.grid().index(i, jj)] = r[2];
      }
      return make_tabulated(std::move(table));
    }
  }
  throw ConfigError("unknown family");
}

std::string HamiltonianModel::to_json() const {
  nlohmann::ordered_json j;
  j["family"] = family_name(family_);
  j["dim"] = dim_;
  nlohmann::ordered_json p;
  switch (family_) {
    case Family::free:
      break;
    case Family::mechanical_power:
      p["q"] = q_;
      p["amplitude"] = amplitude_;
      break;
    case Family::drifted_quadratic:
      p["drift_amplitude"] = drift_amplitude_;
      p["amplitude"] = amplitude_;
      break;
    case Family::anisotropic_2d:
      p["a1"] = a1_;
      p["a2"] = a2_;
      p["amplitude"] = amplitude_;
      break;
    case Family::custom_tabulated:
      p["table_size"] = table_.grid().size(0);
      break;
  }
  j["params"] = p;
  return j.dump();
}

}  // namespace ergolab
