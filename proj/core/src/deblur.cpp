#include "svirkit/deblur.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "svirkit/errors.hpp"
#include "svirkit/image_io.hpp"
#include "svirkit/synthdata.hpp"

namespace svirkit {

namespace {

// Forward-difference gradient with a zero row at the trailing edge of each
// axis; grad has one column per axis.  The adjoint accumulation mirrors the
// forward loop exactly, so the pair passes inner-product tests to roundoff.
void gradient(const Eigen::VectorXd& u, const std::vector<int>& shape, Eigen::MatrixXd& grad) {
  grad.setZero();
  if (shape.size() == 1) {
    const long m = shape[0];
    for (long j = 0; j + 1 < m; ++j) grad(j, 0) = u[j + 1] - u[j];
    return;
  }
  const long m1 = shape[0], m2 = shape[1];
  for (long j1 = 0; j1 < m1; ++j1)
    for (long j2 = 0; j2 < m2; ++j2) {
      const long j = j1 * m2 + j2;
      if (j1 + 1 < m1) grad(j, 0) = u[j + m2] - u[j];
      if (j2 + 1 < m2) grad(j, 1) = u[j + 1] - u[j];
    }
}

void gradient_adjoint(const Eigen::MatrixXd& grad, const std::vector<int>& shape,
                      Eigen::VectorXd& out) {
  out.setZero();
  if (shape.size() == 1) {
    const long m = shape[0];
    for (long j = 0; j + 1 < m; ++j) {
      out[j + 1] += grad(j, 0);
      out[j] -= grad(j, 0);
    }
    return;
  }
  const long m1 = shape[0], m2 = shape[1];
  for (long j1 = 0; j1 < m1; ++j1)
    for (long j2 = 0; j2 < m2; ++j2) {
      const long j = j1 * m2 + j2;
      if (j1 + 1 < m1) {
        out[j + m2] += grad(j, 0);
        out[j] -= grad(j, 0);
      }
      if (j2 + 1 < m2) {
        out[j + 1] += grad(j, 1);
        out[j] -= grad(j, 1);
      }
    }
}

double tv_norm(const Eigen::MatrixXd& grad) {
  double accum = 0.0;
  for (long j = 0; j < grad.rows(); ++j) accum += grad.row(j).norm();
  return accum;
}

} // namespace

double psnr(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& image, double peak) {
  if (reference.rows() != image.rows() || reference.cols() != image.cols())
    throw ValidationError("psnr: image shapes differ");
  if (reference.size() == 0) throw ValidationError("psnr: empty image");
  if (!(peak > 0.0)) throw ValidationError("psnr: peak must be positive");
  const double mse = (reference - image).squaredNorm() / static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double operator_norm_estimate(const SvirOperator& op, int iterations, unsigned long seed) {
  if (iterations < 1) throw ValidationError("operator norm estimate needs an iteration");
  const long m = op.y_grid().total();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(m);
  for (long j = 0; j < m; ++j) v[j] = gauss(rng);
  v.normalize();
  double value = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd z = op.apply_adjoint(op.apply(v));
    value = z.norm();
    if (value == 0.0) return 0.0;
    v = z / value;
  }
  return std::sqrt(value);
}

DeblurResult deblur_tv(const SvirOperator& op, const Eigen::VectorXd& degraded,
                       const DeblurOptions& options) {
  const std::vector<int>& shape = op.y_grid().shape;
  const long m = op.y_grid().total();
  if (degraded.size() != m)
    throw ValidationError("deblur_tv: image does not live on the operator grid");
  if (options.lambda_tv < 0.0) throw ValidationError("deblur_tv: negative penalty");
  if (options.iterations < 1) throw ValidationError("deblur_tv: need at least one iteration");

  const int dim = static_cast<int>(shape.size());
  const double norm_a = operator_norm_estimate(op, options.power_iterations, options.seed);
  const double big_l = std::sqrt(norm_a * norm_a + 4.0 * dim);
  const double tau = 0.99 / big_l;
  const double sigma = tau;

  Eigen::VectorXd u = degraded;
  Eigen::VectorXd bar = u;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m, dim);
  Eigen::MatrixXd grad(m, dim);
  Eigen::VectorXd div(m);

  DeblurResult result;
  result.objective.reserve(options.iterations);
  int rising = 0;
  for (int it = 0; it < options.iterations; ++it) {
    p = (p + sigma * (op.apply(bar) - degraded)) / (1.0 + sigma);

    gradient(bar, shape, grad);
    q += sigma * grad;
    for (long j = 0; j < m; ++j) {
      const double mag = q.row(j).norm();
      if (mag > options.lambda_tv)
        q.row(j) *= options.lambda_tv == 0.0 ? 0.0 : options.lambda_tv / mag;
    }

    gradient_adjoint(q, shape, div);
    const Eigen::VectorXd next = u - tau * (op.apply_adjoint(p) + div);
    bar = 2.0 * next - u;
    u = next;

    gradient(u, shape, grad);
    const double objective =
        0.5 * (op.apply(u) - degraded).squaredNorm() + options.lambda_tv * tv_norm(grad);
    if (it >= 5 && !result.objective.empty() && objective > result.objective.back()) {
      if (++rising >= 10)
        throw NumericalError("deblur_tv diverged: objective rose for ten iterations, " +
                             std::to_string(result.objective.back()) + " -> " +
                             std::to_string(objective) + " at iteration " + std::to_string(it));
    } else {
      rising = 0;
    }
    result.objective.push_back(objective);
  }
  result.restored = std::move(u);
  return result;
}

namespace {

Eigen::MatrixXd demo_truth_image(int size) {
  Eigen::MatrixXd image(size, size);
  for (int i1 = 0; i1 < size; ++i1)
    for (int i2 = 0; i2 < size; ++i2) {
      const double x1 = (i1 + 0.5) / size;
      const double x2 = (i2 + 0.5) / size;
      double v = 0.2;
      const double dx1 = x1 - 0.35, dx2 = x2 - 0.6;
      if (dx1 * dx1 + dx2 * dx2 <= 0.18 * 0.18) v += 0.55;
      if (x1 >= 0.55 && x1 <= 0.8 && x2 >= 0.2 && x2 <= 0.45) v += 0.45;
      const double b1 = x1 - 0.75, b2 = x2 - 0.82;
      v += 0.3 * std::exp(-(b1 * b1 + b2 * b2) / (2.0 * 0.08 * 0.08));
      image(i1, i2) = std::clamp(v, 0.0, 1.0);
    }
  return image;
}

} // namespace

DeblurDemoReport run_deblur_demo(const DeblurDemoConfig& config) {
  if (config.image_size < 8) throw ValidationError("deblur demo image is too small");
  if (config.patch < 4 || config.patch % 2 != 0)
    throw ValidationError("deblur demo patch must be an even count of at least four");
  if (config.psf_grid < 2) throw ValidationError("deblur demo needs a psf grid of at least two");

  const int size = config.image_size;
  const double pixel = 1.0 / size;
  const TensorGrid image_grid = TensorGrid::unit_midpoints(size, 2);
  const TensorGrid stencil_grid = TensorGrid::centered(config.patch, pixel, 2);

  // Gaussian blur whose width grows left to right, discretely normalized so
  // the blur preserves brightness.
  ColumnModel blur = [&](const Eigen::RowVectorXd& y) {
    const double sigma_px = 0.8 + 1.2 * y[1];
    const double sigma = sigma_px * pixel;
    Eigen::VectorXd column(stencil_grid.total());
    for (long t = 0; t < stencil_grid.total(); ++t)
      column[t] = std::exp(-stencil_grid.node(t).squaredNorm() / (2.0 * sigma * sigma));
    column /= column.sum();
    return column;
  };

  const Eigen::MatrixXd truth = demo_truth_image(size);
  Eigen::VectorXd u_true(static_cast<long>(size) * size);
  for (int i1 = 0; i1 < size; ++i1)
    for (int i2 = 0; i2 < size; ++i2) u_true[static_cast<long>(i1) * size + i2] = truth(i1, i2);

  // Degrade with the true blur directly; the estimated operator is reserved
  // for the restoration, as it would be in practice.
  const int patch = config.patch;
  const int center = patch / 2;
  Eigen::VectorXd degraded_flat = Eigen::VectorXd::Zero(u_true.size());
  for (int j1 = 0; j1 < size; ++j1)
    for (int j2 = 0; j2 < size; ++j2) {
      const Eigen::VectorXd column = blur(image_grid.node(static_cast<long>(j1) * size + j2));
      const double uj = u_true[static_cast<long>(j1) * size + j2];
      for (int t1 = 0; t1 < patch; ++t1) {
        const int p1 = j1 + t1 - center;
        if (p1 < 0 || p1 >= size) continue;
        for (int t2 = 0; t2 < patch; ++t2) {
          const int p2 = j2 + t2 - center;
          if (p2 < 0 || p2 >= size) continue;
          degraded_flat[static_cast<long>(p1) * size + p2] += column[t1 * patch + t2] * uj;
        }
      }
    }
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, config.image_noise);
  if (config.image_noise > 0.0)
    for (long j = 0; j < degraded_flat.size(); ++j) degraded_flat[j] += gauss(rng);

  // Re-estimate the blur from a sparse grid of impulse responses.
  const BasisSpec basis(BasisKind::Canonical, patch, 0, 2);
  const LocationSet locations =
      generate_locations(config.psf_grid * config.psf_grid, BoxDomain::unit(2),
                         SamplingScheme::MidpointGrid, config.seed);
  const PsfDataset dataset = sample_psfs_exact(blur, locations, basis, basis.channels(),
                                               config.psf_noise, config.seed + 1);
  FitOptions options;
  options.alpha = 0.0;
  options.order = 2;
  options.mu = config.mu;
  const IrcEstimate estimate = fit(dataset, options);
  const SvirOperator op(estimate, stencil_grid, image_grid);

  DeblurOptions solver;
  solver.lambda_tv = config.lambda_tv;
  solver.iterations = config.iterations;
  solver.seed = config.seed;
  const DeblurResult solved = deblur_tv(op, degraded_flat, solver);

  DeblurDemoReport report;
  report.truth = truth;
  report.degraded.resize(size, size);
  report.restored.resize(size, size);
  for (int i1 = 0; i1 < size; ++i1)
    for (int i2 = 0; i2 < size; ++i2) {
      report.degraded(i1, i2) = degraded_flat[static_cast<long>(i1) * size + i2];
      report.restored(i1, i2) = solved.restored[static_cast<long>(i1) * size + i2];
    }
  report.psnr_degraded = psnr(truth, report.degraded, 1.0);
  report.psnr_restored = psnr(truth, report.restored, 1.0);

  if (!config.out_prefix.empty()) {
    write_pfm(report.truth, config.out_prefix + "_truth.pfm");
    write_pfm(report.degraded, config.out_prefix + "_degraded.pfm");
    write_pfm(report.restored, config.out_prefix + "_restored.pfm");
    write_pgm(report.truth, config.out_prefix + "_truth.pgm", 0.0, 1.0);
    write_pgm(report.degraded, config.out_prefix + "_degraded.pgm", 0.0, 1.0);
    write_pgm(report.restored, config.out_prefix + "_restored.pgm", 0.0, 1.0);
  }
  return report;
}

} // namespace svirkit
