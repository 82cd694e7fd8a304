#pragma once

#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/LU>

#include "svirkit/basis.hpp"
#include "svirkit/geometry.hpp"
#include "svirkit/kernel.hpp"

namespace svirkit {

// G + n*mu*I with G[i][j] = rho(|y_i - y_j|).
struct GramSystem {
  Eigen::MatrixXd matrix;
  double mu = 0.0;
  double ridge = 0.0; // n * mu
};

GramSystem assemble_gram(const KernelTable& table, const LocationSet& centers, double mu);

// Cholesky factorization of one ridge system, reused across every channel
// that shares the same penalty weight.  If the first attempt fails the
// diagonal gets one jitter of 1e-12 * mean(diag) before giving up.
struct ChannelFactorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::MatrixXd system;
  double weight = 0.0;
  bool jittered = false;
  mutable int solve_count = 0;
};

ChannelFactorization factorize(const GramSystem& system, double weight_value = 0.0);

// Max-norm of (system - L L^T) relative to the system's max entry.
double factorization_residual(const ChannelFactorization& fact);

// Solves to a residual of 1e-10 * |rhs| (iterative refinement as needed).
Eigen::VectorXd solve_channel(const ChannelFactorization& fact, const Eigen::VectorXd& rhs);

struct GroupedSolveResult {
  Eigen::MatrixXd coefficients; // channels x centers
  int factorization_count = 0;
  std::vector<int> solves_per_factorization;
};

// All channels at once: one factorization per unique weight, one triangular
// solve per channel.  observations holds one channel per row; tables come in
// the same order as weights.groups.
GroupedSolveResult solve_grouped(const std::vector<KernelTable>& group_tables,
                                 const WeightSequence& weights, const LocationSet& centers,
                                 const Eigen::MatrixXd& observations, double mu);

// Conditionally positive definite path (alpha = 0): polyharmonic kernel with
// the degree-(s-1) polynomial block, solved as one LU-factorized saddle
// system shared by every channel.
struct CpdSystem {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  Eigen::MatrixXd saddle;
  Eigen::MatrixXd monomials; // n x p
  int order = 1;
  int dim = 1;
  double mu = 0.0;
};

CpdSystem cpd_factorize(const LocationSet& centers, int order, double mu);

struct CpdSolution {
  Eigen::VectorXd kernel_coeffs;
  Eigen::VectorXd poly_coeffs;
};

CpdSolution cpd_solve(const CpdSystem& system, const Eigen::VectorXd& rhs);

// Monomial basis values up to total degree s-1, the same column order the
// CPD solver uses.
Eigen::MatrixXd monomial_matrix(const Eigen::MatrixXd& points, int order);

} // namespace svirkit
