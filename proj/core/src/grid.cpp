#include "ergolab/grid.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ergolab {

TorusGrid::TorusGrid(int dim, std::array<int, 2> sizes) : dim_(dim), sizes_(sizes) {
  if (dim < 1 || dim > 2) throw ConfigError("TorusGrid: dim must be 1 or 2");
  if (dim == 1) sizes_[1] = 1;
  for (int a = 0; a < dim; ++a)
    if (sizes_[a] < 8) throw ConfigError("TorusGrid: need at least 8 points per axis");
}

double TorusGrid::cell_volume() const {
  double v = spacing(0);
  if (dim_ == 2) v *= spacing(1);
  return v;
}

double TorusGrid::coord(int node, int axis) const {
  const int i = axis == 0 ? node / sizes_[1] : node % sizes_[1];
  return i * spacing(axis);
}

GridField::GridField(TorusGrid grid, int arity, double fill)
    : grid_(grid), arity_(arity),
      values_(static_cast<std::size_t>(arity) * grid.num_nodes(), fill) {
  if (arity != 1 && arity != grid.dim())
    throw ConfigError("GridField: arity must be 1 (scalar) or dim (vector)");
}

std::span<double> GridField::component(int c) {
  return {values_.data() + static_cast<std::size_t>(c) * grid_.num_nodes(),
          static_cast<std::size_t>(grid_.num_nodes())};
}
std::span<const double> GridField::component(int c) const {
  return {values_.data() + static_cast<std::size_t>(c) * grid_.num_nodes(),
          static_cast<std::size_t>(grid_.num_nodes())};
}

bool GridField::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

template <class F>
void for_nodes(const TorusGrid& g, F&& body) {
  const int n0 = g.size(0), n1 = g.dim() == 2 ? g.size(1) : 1;
  for (int i = 0; i < n0; ++i)
    for (int j = 0; j < n1; ++j) body(i, j);
}

}  // namespace

GridField gradient(const GridField& f) {
  if (!f.is_scalar()) throw DomainError("gradient: scalar field required");
  const TorusGrid& g = f.grid();
  GridField out(g, g.dim());
  for (int axis = 0; axis < g.dim(); ++axis) {
    const double inv2h = 1.0 / (2.0 * g.spacing(axis));
    for_nodes(g, [&](int i, int j) {
      const int ip = axis == 0 ? g.index_wrapped(i + 1, j) : g.index_wrapped(i, j + 1);
      const int im = axis == 0 ? g.index_wrapped(i - 1, j) : g.index_wrapped(i, j - 1);
      out.at(g.index(i, j), axis) = (f[ip] - f[im]) * inv2h;
    });
  }
  return out;
}

GridField laplacian(const GridField& f) {
  if (!f.is_scalar()) throw DomainError("laplacian: scalar field required");
  const TorusGrid& g = f.grid();
  GridField out(g, 1);
  for (int axis = 0; axis < g.dim(); ++axis) {
    const double invh2 = 1.0 / (g.spacing(axis) * g.spacing(axis));
    for_nodes(g, [&](int i, int j) {
      const int c = g.index(i, j);
      const int ip = axis == 0 ? g.index_wrapped(i + 1, j) : g.index_wrapped(i, j + 1);
      const int im = axis == 0 ? g.index_wrapped(i - 1, j) : g.index_wrapped(i, j - 1);
      out[c] += (f[ip] - 2.0 * f[c] + f[im]) * invh2;
    });
  }
  return out;
}

GridField divergence(const GridField& f) {
  const TorusGrid& g = f.grid();
  if (f.arity() != g.dim()) throw DomainError("divergence: vector field required");
  GridField out(g, 1);
  for (int axis = 0; axis < g.dim(); ++axis) {
    const double inv2h = 1.0 / (2.0 * g.spacing(axis));
    for_nodes(g, [&](int i, int j) {
      const int ip = axis == 0 ? g.index_wrapped(i + 1, j) : g.index_wrapped(i, j + 1);
      const int im = axis == 0 ? g.index_wrapped(i - 1, j) : g.index_wrapped(i, j - 1);
      out[g.index(i, j)] += (f.at(ip, axis) - f.at(im, axis)) * inv2h;
    });
  }
  return out;
}

double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 8) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

double integrate(const GridField& f) {
  if (!f.is_scalar()) throw DomainError("integrate: scalar field required");
  return pairwise_sum(f.values()) * f.grid().cell_volume();
}

double inner(const GridField& f, const GridField& g) {
  if (f.size() != g.size()) throw DomainError("inner: size mismatch");
  std::vector<double> prod(f.size());
  for (std::size_t k = 0; k < prod.size(); ++k) prod[k] = f[k] * g[k];
  return pairwise_sum(prod) * f.grid().cell_volume();
}

double max_abs(const GridField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

SparseMat gradient_matrix(const TorusGrid& g, int axis) {
  const int n = g.num_nodes();
  const double inv2h = 1.0 / (2.0 * g.spacing(axis));
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * n);
  for_nodes(g, [&](int i, int j) {
    const int c = g.index(i, j);
    const int ip = axis == 0 ? g.index_wrapped(i + 1, j) : g.index_wrapped(i, j + 1);
    const int im = axis == 0 ? g.index_wrapped(i - 1, j) : g.index_wrapped(i, j - 1);
    trip.emplace_back(c, ip, inv2h);
    trip.emplace_back(c, im, -inv2h);
  });
  SparseMat m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

SparseMat laplacian_matrix(const TorusGrid& g) {
  const int n = g.num_nodes();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(5 * n);
  for (int axis = 0; axis < g.dim(); ++axis) {
    const double invh2 = 1.0 / (g.spacing(axis) * g.spacing(axis));
    for_nodes(g, [&](int i, int j) {
      const int c = g.index(i, j);
      const int ip = axis == 0 ? g.index_wrapped(i + 1, j) : g.index_wrapped(i, j + 1);
      const int im = axis == 0 ? g.index_wrapped(i - 1, j) : g.index_wrapped(i, j - 1);
      trip.emplace_back(c, ip, invh2);
      trip.emplace_back(c, im, invh2);
      trip.emplace_back(c, c, -2.0 * invh2);
    });
  }
  SparseMat m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

std::string format_double(double v) {
  char buf[40];
  // shortest representation that round-trips
  std::snprintf(buf, sizeof buf, "%.17g", v);
  double back;
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
    std::sscanf(shorter, "%lf", &back);
    if (back == v) return shorter;
  }
  return buf;
}

void write_csv(const GridField& f, std::ostream& os) {
  const TorusGrid& g = f.grid();
  os << g.size(0);
  if (g.dim() == 2) os << ' ' << g.size(1);
  os << ' ' << f.arity() << '\n';
  for (double v : f.values()) os << format_double(v) << '\n';
}

GridField read_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw ConfigError("GridField csv: empty stream");
  std::istringstream hs(header);
  std::vector<int> nums;
  int x;
  while (hs >> x) nums.push_back(x);
  if (nums.size() < 2 || nums.size() > 3) throw ConfigError("GridField csv: bad header");
  const int arity = nums.back();
  TorusGrid grid = nums.size() == 2 ? TorusGrid::make_1d(nums[0])
                                    : TorusGrid::make_2d(nums[0], nums[1]);
  GridField f(grid, arity);
  for (std::size_t k = 0; k < f.size(); ++k)
    if (!(is >> f[k])) throw ConfigError("GridField csv: truncated values");
  if (!f.all_finite()) throw ConfigError("GridField csv: non-finite value");
  return f;
}

void write_csv_file(const GridField& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  write_csv(f, os);
}

GridField read_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open: " + path);
  return read_csv(is);
}

std::string to_json(const GridField& f) {
  nlohmann::ordered_json j;
  j["grid"]["dim"] = f.grid().dim();
  j["grid"]["sizes"] = f.grid().dim() == 2
                           ? std::vector<int>{f.grid().size(0), f.grid().size(1)}
                           : std::vector<int>{f.grid().size(0)};
  j["arity"] = f.arity();
  j["values"] = f.values();
  return j.dump();
}

GridField field_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  const auto sizes = j.at("grid").at("sizes").get<std::vector<int>>();
  TorusGrid grid = sizes.size() == 1 ? TorusGrid::make_1d(sizes[0])
                                     : TorusGrid::make_2d(sizes[0], sizes[1]);
  GridField f(grid, j.at("arity").get<int>());
  auto vals = j.at("values").get<std::vector<double>>();
  if (vals.size() != f.size()) throw ConfigError("GridField json: wrong value count");
  f.values() = std::move(vals);
  if (!f.all_finite()) throw ConfigError("GridField json: non-finite value");
  return f;
}

}  // namespace ergolab
