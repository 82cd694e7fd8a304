#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

#include "svirkit/basis.hpp"
#include "svirkit/geometry.hpp"
#include "svirkit/grid.hpp"

namespace svirkit {

// Ground-truth Gaussian SVIR families.  The width law makes the response
// vary across the domain:
//   narrow: sigma(y) = 0.05 * (1 + 2 min(y, 1-y))       (widest mid-domain)
//   wide:   sigma(y) = 1 + 2 max(1-y, y)                (widest at the edges)
// The 2D family applies the wide law to the first coordinate only.
enum class GaussianVariant { Narrow, Wide };

GaussianVariant gaussian_variant_from_string(const std::string& name);
std::string to_string(GaussianVariant variant);

double gaussian_sigma_1d(GaussianVariant variant, double y);
double gaussian_sigma_2d(double y1);

// Normalized Gaussian PSF sampled on the x-grid for a response location y.
Eigen::VectorXd gaussian_column_1d(GaussianVariant variant, const TensorGrid& x_grid, double y);
Eigen::VectorXd gaussian_column_2d(const TensorGrid& x_grid, const Eigen::RowVectorXd& y);

SvirGrid gaussian_svir_1d(GaussianVariant variant, const TensorGrid& x_grid,
                          const TensorGrid& y_grid);
SvirGrid gaussian_svir_2d(const TensorGrid& x_grid, const TensorGrid& y_grid);

// Phantom with exactly known coefficient decay: channel k carries
//   F(y)[k] = (k+1)^{-(2r+d)/(2d)} * prod_a cos(2 pi f_{k,a} y_a + phi_{k,a})
// with integer frequencies, so truncation tails have a closed form and rate
// studies need no grid interpolation.
struct PrescribedPhantom {
  SvirGrid grid;
  BasisSpec basis;
  double smoothness_r = 1.0;
  double smoothness_s = 1.0;
  Eigen::VectorXd amplitudes;
  Eigen::MatrixXi frequencies; // channels x dim
  Eigen::MatrixXd phases;      // channels x dim
};

PrescribedPhantom prescribed_smoothness_svir(double r, double s, unsigned long seed,
                                             const TensorGrid& x_grid, const TensorGrid& y_grid,
                                             const BasisSpec& basis);

// Exact coefficient vector at an arbitrary location.
Eigen::VectorXd prescribed_coefficients(const PrescribedPhantom& phantom,
                                        const Eigen::RowVectorXd& y, int channels);

// Hilbert-Schmidt norm of the part dropped by keeping the first
// `keep_channels` channels, in the grid quadrature convention.  Exact as
// long as the midpoint y-grid resolves every frequency (at least 7 cells).
double prescribed_truncation_tail(const PrescribedPhantom& phantom, int keep_channels);

// Scattered noisy observations of a phantom's coefficient vectors.
struct PsfDataset {
  LocationSet locations;
  BasisSpec basis;
  Eigen::MatrixXd observations; // count x channels, row i is F_i
  double noise_sigma = 0.0;
  unsigned long seed = 0;

  int count() const { return static_cast<int>(observations.rows()); }
  int channels() const { return static_cast<int>(observations.cols()); }
};

// Grid path: PSF columns at the sample locations come from multilinear
// interpolation of the phantom along y (clamped at the boundary cells), get
// analyzed in the basis and truncated to `channels`.  Noise is iid Gaussian
// with standard deviation sigma, drawn location-major then channel-major.
PsfDataset sample_psfs(const SvirGrid& phantom, const LocationSet& locations,
                       const BasisSpec& basis, int channels, double sigma, unsigned long seed);

// Exact path: the model produces the PSF column at the exact location, so no
// interpolation bias enters rate measurements.
using ColumnModel = std::function<Eigen::VectorXd(const Eigen::RowVectorXd&)>;
PsfDataset sample_psfs_exact(const ColumnModel& model, const LocationSet& locations,
                             const BasisSpec& basis, int channels, double sigma,
                             unsigned long seed);

// Exact path for the prescribed phantom, skipping the synthesize/analyze
// round trip entirely.
PsfDataset sample_prescribed_psfs(const PrescribedPhantom& phantom, const LocationSet& locations,
                                  int channels, double sigma, unsigned long seed);

// JSON manifest plus a little-endian 64-bit float blob (location-major)
// stored next to it.
void save_dataset(const PsfDataset& dataset, const std::string& manifest_path);
PsfDataset load_dataset(const std::string& manifest_path);

} // namespace svirkit
