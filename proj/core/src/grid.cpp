#include "svirkit/grid.hpp"

#include <cmath>

#include "svirkit/errors.hpp"

namespace svirkit {

TensorGrid::TensorGrid(Eigen::VectorXd origin_, Eigen::VectorXd spacing_, std::vector<int> shape_)
    : origin(std::move(origin_)), spacing(std::move(spacing_)), shape(std::move(shape_)) {
  const int d = static_cast<int>(shape.size());
  if (d < 1 || d > 2) throw ValidationError("tensor grid dimension must be 1 or 2");
  if (origin.size() != d || spacing.size() != d)
    throw ValidationError("tensor grid origin/spacing length must match the shape");
  for (int a = 0; a < d; ++a) {
    if (shape[a] < 1) throw ValidationError("tensor grid needs at least one node per axis");
    if (!(spacing[a] > 0.0)) throw ValidationError("tensor grid spacing must be positive");
  }
}

long TensorGrid::total() const {
  long t = 1;
  for (int s : shape) t *= s;
  return t;
}

double TensorGrid::cell_measure() const {
  double m = 1.0;
  for (int a = 0; a < dim(); ++a) m *= spacing[a];
  return m;
}

Eigen::RowVectorXd TensorGrid::node(long flat) const {
  const int d = dim();
  Eigen::RowVectorXd out(d);
  for (int a = d - 1; a >= 0; --a) {
    const long i = flat % shape[a];
    flat /= shape[a];
    out[a] = origin[a] + static_cast<double>(i) * spacing[a];
  }
  return out;
}

TensorGrid TensorGrid::centered(int count, double step, int dim) {
  if (count < 2) throw ValidationError("centered grid needs at least two nodes per axis");
  Eigen::VectorXd origin = Eigen::VectorXd::Constant(dim, -step * (count / 2));
  Eigen::VectorXd spacing = Eigen::VectorXd::Constant(dim, step);
  return TensorGrid(origin, spacing, std::vector<int>(dim, count));
}

TensorGrid TensorGrid::unit_midpoints(int cells, int dim) {
  if (cells < 1) throw ValidationError("midpoint grid needs at least one cell per axis");
  const double h = 1.0 / cells;
  Eigen::VectorXd origin = Eigen::VectorXd::Constant(dim, 0.5 * h);
  Eigen::VectorXd spacing = Eigen::VectorXd::Constant(dim, h);
  return TensorGrid(origin, spacing, std::vector<int>(dim, cells));
}

SvirGrid make_svir_grid(const TensorGrid& x_grid, const TensorGrid& y_grid) {
  if (x_grid.dim() != y_grid.dim())
    throw ValidationError("SVIR x and y grids must share one dimension");
  SvirGrid out;
  out.x_grid = x_grid;
  out.y_grid = y_grid;
  out.values = Eigen::MatrixXd::Zero(x_grid.total(), y_grid.total());
  return out;
}

bool same_grid(const TensorGrid& a, const TensorGrid& b, double tol) {
  if (a.shape != b.shape) return false;
  for (int i = 0; i < a.dim(); ++i) {
    if (std::abs(a.origin[i] - b.origin[i]) > tol) return false;
    if (std::abs(a.spacing[i] - b.spacing[i]) > tol) return false;
  }
  return true;
}

} // namespace svirkit
