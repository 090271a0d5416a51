#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

namespace ergolab {

/// Error hierarchy shared by all modules.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Uniform periodic grid on [0,1)^n, n in {1,2}. Nodes are x_i = i*h_k,
/// index arithmetic is exact mod N_k.
class TorusGrid {
 public:
  TorusGrid() = default;
  TorusGrid(int dim, std::array<int, 2> sizes);
  static TorusGrid make_1d(int n) { return TorusGrid(1, {n, 1}); }
  static TorusGrid make_2d(int nx, int ny) { return TorusGrid(2, {nx, ny}); }

  int dim() const { return dim_; }
  int size(int axis) const { return sizes_[axis]; }
  double spacing(int axis) const { return 1.0 / sizes_[axis]; }
  int num_nodes() const { return sizes_[0] * sizes_[1]; }
  /// Product of spacings; the rectangle-rule weight per node.
  double cell_volume() const;

  int wrap(int i, int axis) const {
    const int n = sizes_[axis];
    i %= n;
    return i < 0 ? i + n : i;
  }
  /// Row-major node index (axis 0 slowest).
  int index(int i, int j = 0) const { return i * sizes_[1] + j; }
  int index_wrapped(int i, int j = 0) const {
    return index(wrap(i, 0), dim_ == 2 ? wrap(j, 1) : 0);
  }
  /// Coordinate of node `node` along `axis`.
  double coord(int node, int axis) const;

  bool operator==(const TorusGrid&) const = default;

 private:
  int dim_ = 1;
  std::array<int, 2> sizes_ = {8, 1};
};

/// Scalar or vector field sampled at grid nodes. Vector fields are stored
/// component-blocked: values[c*num_nodes + node].
class GridField {
 public:
  GridField() = default;
  GridField(TorusGrid grid, int arity, double fill = 0.0);

  const TorusGrid& grid() const { return grid_; }
  int arity() const { return arity_; }
  bool is_scalar() const { return arity_ == 1; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& at(int node, int comp = 0) { return values_[comp * grid_.num_nodes() + node]; }
  double at(int node, int comp = 0) const { return values_[comp * grid_.num_nodes() + node]; }

  std::span<double> component(int c);
  std::span<const double> component(int c) const;
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  /// All entries finite (type invariant).
  bool all_finite() const;

 private:
  TorusGrid grid_;
  int arity_ = 1;
  std::vector<double> values_;
};

// -- discrete calculus (second-order central, periodic) ----------------------

/// Central difference (f_{i+1} - f_{i-1})/(2h) per axis.
GridField gradient(const GridField& f);
/// (f_{i+1} - 2 f_i + f_{i-1})/h^2 summed over axes.
GridField laplacian(const GridField& f);
/// Central differences per component, summed; exact negative transpose of
/// gradient so that <phi, div F> + <grad phi, F> = 0 to round-off.
GridField divergence(const GridField& f);
/// Rectangle rule, fixed-order pairwise summation (thread-count independent).
double integrate(const GridField& f);

/// <f, g> integrate of the pointwise product of two scalar fields.
double inner(const GridField& f, const GridField& g);
double max_abs(const GridField& f);

/// Fixed-order pairwise sum of a raw array.
double pairwise_sum(std::span<const double> x);

// -- sparse operator assembly -------------------------------------------------

using SparseMat = Eigen::SparseMatrix<double>;

/// Central-difference first derivative along `axis` as a sparse matrix.
SparseMat gradient_matrix(const TorusGrid& grid, int axis);
/// Periodic second-order Laplacian (all axes) as a sparse matrix.
SparseMat laplacian_matrix(const TorusGrid& grid);

// -- serialization ------------------------------------------------------------

/// CSV: header "N1 [N2] arity", then one value per line in storage order.
void write_csv(const GridField& f, std::ostream& os);
GridField read_csv(std::istream& is);
void write_csv_file(const GridField& f, const std::string& path);
GridField read_csv_file(const std::string& path);

std::string to_json(const GridField& f);
GridField field_from_json(const std::string& json_text);

/// Canonical shortest-roundtrip formatting used by every writer, so outputs
/// are byte-reproducible.
std::string format_double(double v);

}  // namespace ergolab
