#pragma once

#include <iosfwd>

#include <Eigen/Dense>

namespace svirkit {

// Radial reproducing kernel given in the Fourier domain by the profile
//   F[rho](xi) = 1 / (a |xi|^(2s) + b),  a = 1 - alpha,  b = alpha * weight,
// with the symmetric transform convention (factor (2pi)^(-d/2) both ways).
// b > 0 gives a positive definite kernel; b = 0 is the conditionally
// positive definite limit handled by the polyharmonic family below.
struct RadialKernelSpec {
  int dim = 1;
  int order = 1; // s
  double alpha = 0.0;
  double weight = 0.0;

  RadialKernelSpec() = default;
  RadialKernelSpec(int d, int s, double alpha_, double weight_);

  double a() const { return 1.0 - alpha; }
  double b() const { return alpha * weight; }
  bool positive_definite() const { return b() > 0.0; }
};

double spectral_profile(const RadialKernelSpec& spec, double xi_norm);

// rho(r) by direct numerical inversion of the radial profile: the integral
// is split at the zeros of the oscillating factor and the alternating panel
// sums are Euler-accelerated.  This is the reference the tables are built
// from; requires a positive definite spec.
double invert_profile(const RadialKernelSpec& spec, double r, double tol = 1e-10);

// Tabulated kernel on a log-spaced radius grid with monotone cubic
// interpolation.  Below radii[0] the value blends linearly to rho(0);
// beyond tail_cutoff (where |rho| has fallen under 1e-10 * rho(0)) it is 0.
struct KernelTable {
  RadialKernelSpec spec;
  double r_max = 0.0;
  Eigen::VectorXd radii;
  Eigen::VectorXd values;
  Eigen::VectorXd slopes;
  double rho_zero = 0.0;
  double tail_cutoff = 0.0;
};

KernelTable build_table(const RadialKernelSpec& spec, double r_max, int nodes = 2048,
                        double quad_tol = 1e-9);

double evaluate(const KernelTable& table, double r);

// r^(2s-d) for odd d, r^(2s-d) log r for even d (0 at r = 0).
double polyharmonic(int order, int dim, double r);

// Sign that makes the polyharmonic kernel positive on the subspace cut out
// by the degree-(s-1) polynomial constraints.
double cpd_sign(int order, int dim);

// Number of monomials of degree <= s-1 in d variables.
int polynomial_dim(int order, int dim);

// Little-endian float64 blob: {d, s, alpha, w, M, r_max}, then radii, then
// values.  Slopes, rho(0) and the tail cutoff are reconstructed on read.
void write_kernel_blob(std::ostream& out, const KernelTable& table);
KernelTable read_kernel_blob(std::istream& in);

} // namespace svirkit
