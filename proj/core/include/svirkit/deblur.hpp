#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "svirkit/estimator.hpp"

namespace svirkit {

// Peak signal-to-noise ratio 10 log10(peak^2 / MSE) between two images of
// identical shape.  Identical images have no noise to measure, signalled by
// an infinite return value.
double psnr(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& image, double peak);

// Largest singular value of the operator, estimated by running the power
// iteration on its normal map.
double operator_norm_estimate(const SvirOperator& op, int iterations = 20,
                              unsigned long seed = 0);

struct DeblurOptions {
  double lambda_tv = 1e-4;
  int iterations = 300;
  int power_iterations = 20;
  unsigned long seed = 0; // power-method start vector
};

struct DeblurResult {
  Eigen::VectorXd restored;
  std::vector<double> objective; // one entry per iteration
};

// Minimizes 1/2 ||H u - f||^2 + lambda_tv TV(u) over the operator's y-grid
// with a primal-dual scheme; TV is the isotropic forward-difference total
// variation.  The run is deterministic for a fixed seed.  An objective that
// keeps rising for ten consecutive iterations after the five-iteration
// burn-in aborts with a numerical error.
DeblurResult deblur_tv(const SvirOperator& op, const Eigen::VectorXd& degraded,
                       const DeblurOptions& options);

// Self-contained spatially varying deblurring demonstration: a piecewise
// smooth test image is blurred by a Gaussian family whose width grows across
// the frame, the blur is re-estimated from a small grid of impulse
// responses, and the estimate drives the restoration.
struct DeblurDemoConfig {
  int image_size = 128;
  int patch = 24;           // impulse-response stencil, nodes per axis
  int psf_grid = 5;         // PSF sampling locations per axis
  double psf_noise = 1e-3;  // noise on the sampled impulse responses
  double image_noise = 5e-3; // noise on the degraded image
  double mu = 1e-8;
  double lambda_tv = 2e-4;
  int iterations = 300;
  unsigned long seed = 1;
  std::string out_prefix; // when nonempty, writes PFM/PGM image files
};

struct DeblurDemoReport {
  double psnr_degraded = 0.0;
  double psnr_restored = 0.0;
  Eigen::MatrixXd truth;
  Eigen::MatrixXd degraded;
  Eigen::MatrixXd restored;
};

DeblurDemoReport run_deblur_demo(const DeblurDemoConfig& config);

} // namespace svirkit
