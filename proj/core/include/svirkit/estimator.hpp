#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "svirkit/basis.hpp"
#include "svirkit/geometry.hpp"
#include "svirkit/grid.hpp"
#include "svirkit/kernel.hpp"
#include "svirkit/synthdata.hpp"

namespace svirkit {

// Kernel tables keyed by their full parameter set.  A study runs hundreds of
// fits against the same handful of kernels; building each table once brings
// the table cost down to a constant.  Not safe for concurrent use.
class KernelTableCache {
 public:
  const KernelTable& get(const RadialKernelSpec& spec, double r_max, int nodes, double quad_tol);
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, KernelTable> entries_;
};

struct FitOptions {
  double alpha = 0.3;        // weight of the channel-mass penalty term
  int order = 1;             // smoothness exponent of the kernel (s)
  double smoothness_r = 1.0; // channel-weight growth exponent (r)
  double mu = 1e-4;
  double table_r_max = 0.0;  // 0 = cover the unit domain with margin
  int table_nodes = 2048;
  double quad_tol = 1e-9;
};

// Fitted coefficient field: every channel k carries a representer expansion
// F(y)[k] = sum_i c_k[i] rho_k(|y - y_i|) over the shared centers.  With
// alpha = 0 the kernel degenerates to the polyharmonic family, handled in a
// conditionally positive definite mode with a per-channel polynomial part.
struct IrcEstimate {
  LocationSet centers;
  BasisSpec basis;
  int channels = 0;
  double alpha = 0.0;
  double mu = 0.0;
  int order = 1;
  double smoothness_r = 1.0;
  WeightSequence weights;            // truncated to `channels`
  std::vector<KernelTable> tables;   // one per weight group; empty in cpd mode
  Eigen::MatrixXd coefficients;      // channels x n
  Eigen::MatrixXd poly_coefficients; // channels x p in cpd mode, else empty
  bool cpd = false;
  int factorization_count = 0;
};

IrcEstimate fit(const PsfDataset& dataset, const FitOptions& options,
                KernelTableCache* cache = nullptr);

Eigen::VectorXd evaluate_irc(const IrcEstimate& estimate, const Eigen::RowVectorXd& y);

// Synthesizes the estimated coefficient field into PSF columns on the grid.
SvirGrid reconstruct_svir(const IrcEstimate& estimate, const TensorGrid& x_grid,
                          const TensorGrid& y_grid);

// Norm of the difference in the grid quadrature (rectangle rule with cell
// measures); both grids must match.
double hilbert_schmidt_error(const SvirGrid& a, const SvirGrid& b);

// Discrete product-convolution operator built from an estimate: channel
// stencils come from the basis on the x-grid, the coefficient field is
// evaluated once on the y-grid, and applications run as zero-padded (linear)
// convolutions.  Canonical bases use direct shift-adds; wavelet bases reuse
// one cached FFT per atom.  x and y grids must share their spacing so
// stencil offsets are whole pixels.  Not safe for concurrent applies.
class SvirOperator {
 public:
  SvirOperator(const IrcEstimate& estimate, const TensorGrid& x_grid, const TensorGrid& y_grid);
  ~SvirOperator();
  SvirOperator(SvirOperator&&) noexcept;
  SvirOperator& operator=(SvirOperator&&) noexcept;

  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& v) const;

  const TensorGrid& y_grid() const;
  const Eigen::MatrixXd& field() const; // y-nodes x channels

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot conveniences around SvirOperator.
Eigen::VectorXd apply_operator(const IrcEstimate& estimate, const TensorGrid& x_grid,
                               const TensorGrid& y_grid, const Eigen::VectorXd& u);
Eigen::VectorXd apply_operator_adjoint(const IrcEstimate& estimate, const TensorGrid& x_grid,
                                       const TensorGrid& y_grid, const Eigen::VectorXd& v);

struct ScheduleResult {
  double mu = 0.0;
  bool floored = false; // clamped at the 1e-12 floor (e.g. noise-free data)
};

// mu = C (N sigma^2 / n)^{2s/(2s+d)} (1-alpha)^{-d/(2s+d)}.
ScheduleResult regularization_schedule(int n, int channels, double sigma2, double alpha,
                                       int order, int dim, double constant);

// Variant balancing truncation against estimation when N follows its own
// schedule: mu = C (sigma^2 / n)^{2q/(2q+d)} (1-alpha)^{-d/(2s+d)} with
// 1/q = 1/r + 1/s.
ScheduleResult regularization_schedule_balanced(int n, double sigma2, double alpha, int order,
                                                double smoothness_r, int dim, double constant);

// Matching channel-count schedule, rounded to the nearest power of two and
// clipped to [4, max_channels].
int channel_schedule(int n, double sigma2, double alpha, int order, double smoothness_r, int dim,
                     double constant, int max_channels);

// k-fold cross-validation over PSF locations; returns the candidate with the
// smallest held-out mean squared coefficient error (ties break toward the
// smaller mu).  Deterministic given the seed.
double select_mu(const PsfDataset& dataset, const FitOptions& options,
                 const std::vector<double>& candidates, int folds, unsigned long seed,
                 KernelTableCache* cache = nullptr);

// JSON manifest plus one blob holding coefficients (channel-major), the
// polynomial block, and every kernel table, all little-endian 64-bit.
void save_estimate(const IrcEstimate& estimate, const std::string& manifest_path);
IrcEstimate load_estimate(const std::string& manifest_path);

} // namespace svirkit
