#pragma once

#include <vector>

#include <Eigen/Dense>

namespace svirkit {

// Regular tensor grid: node index i along an axis sits at origin + i*spacing.
// Flat indices are row-major with the last axis fastest.
struct TensorGrid {
  Eigen::VectorXd origin;
  Eigen::VectorXd spacing;
  std::vector<int> shape;

  TensorGrid() = default;
  TensorGrid(Eigen::VectorXd origin_, Eigen::VectorXd spacing_, std::vector<int> shape_);

  int dim() const { return static_cast<int>(shape.size()); }
  long total() const;
  double cell_measure() const; // product of spacings
  Eigen::RowVectorXd node(long flat) const;
  double axis_extent(int axis) const { return shape[axis] * spacing[axis]; }

  // FFT-style centered axis: x_m = (m - count/2) * step, so index count/2
  // lands exactly on 0.
  static TensorGrid centered(int count, double step, int dim);
  // Cell midpoints of [0,1]^dim: (j + 1/2) / cells.
  static TensorGrid unit_midpoints(int cells, int dim);
};

// Discretized SVIR: values(i, j) = S(x_i, y_j) with x flattened over the
// x-grid and y over the y-grid.  Column j is the PSF observed at y_j,
// recentered at x = 0.
struct SvirGrid {
  TensorGrid x_grid;
  TensorGrid y_grid;
  Eigen::MatrixXd values;
};

SvirGrid make_svir_grid(const TensorGrid& x_grid, const TensorGrid& y_grid);

bool same_grid(const TensorGrid& a, const TensorGrid& b, double tol = 1e-12);

} // namespace svirkit
