#include "svirkit/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <fftw3.h>
#include <json.hpp>

#include "little_endian.hpp"
#include "svirkit/errors.hpp"
#include "svirkit/solver.hpp"

namespace svirkit {

namespace {

constexpr double kMuFloor = 1e-12;

void check_basis_grid(const TensorGrid& x_grid, const BasisSpec& basis) {
  if (x_grid.dim() != basis.dim)
    throw ValidationError("x-grid dimension does not match the basis");
  for (int s : x_grid.shape)
    if (s != basis.signal_length)
      throw ValidationError("x-grid must have basis signal_length nodes per axis");
}

Eigen::VectorXd distances_to(const LocationSet& centers, const Eigen::RowVectorXd& y) {
  Eigen::VectorXd out(centers.count());
  for (int i = 0; i < centers.count(); ++i) out[i] = (y - centers.points.row(i)).norm();
  return out;
}

int next_pow2(int n) {
  int l = 1;
  while (l < n) l <<= 1;
  return l;
}

} // namespace

const KernelTable& KernelTableCache::get(const RadialKernelSpec& spec, double r_max, int nodes,
                                         double quad_tol) {
  char key[160];
  std::snprintf(key, sizeof key, "%d|%d|%.17g|%.17g|%.17g|%d|%.17g", spec.dim, spec.order,
                spec.alpha, spec.weight, r_max, nodes, quad_tol);
  auto it = entries_.find(key);
  if (it == entries_.end())
    it = entries_.emplace(key, build_table(spec, r_max, nodes, quad_tol)).first;
  return it->second;
}

IrcEstimate fit(const PsfDataset& dataset, const FitOptions& options, KernelTableCache* cache) {
  if (dataset.count() < 1) throw ValidationError("fit: dataset has no observations");
  const int d = dataset.locations.dim();
  if (dataset.basis.dim != d)
    throw ValidationError("fit: basis dimension does not match the sample locations");
  if (options.mu < 0.0) throw ValidationError("fit: mu must be nonnegative");

  IrcEstimate est;
  est.centers = dataset.locations;
  est.basis = dataset.basis;
  est.channels = dataset.channels();
  est.alpha = options.alpha;
  est.mu = options.mu;
  est.order = options.order;
  est.smoothness_r = options.smoothness_r;

  const Eigen::MatrixXd observations = dataset.observations.transpose(); // channels x n

  if (options.alpha == 0.0) {
    // The alpha = 0 kernel has no weight factor, so every channel shares the
    // same conditionally positive-definite system and the subband weights
    // never enter.
    est.cpd = true;
    const CpdSystem system = cpd_factorize(dataset.locations, options.order, options.mu);
    const int p = static_cast<int>(system.monomials.cols());
    est.coefficients.resize(est.channels, dataset.count());
    est.poly_coefficients.resize(est.channels, p);
    for (int k = 0; k < est.channels; ++k) {
      const CpdSolution sol = cpd_solve(system, observations.row(k).transpose());
      est.coefficients.row(k) = sol.kernel_coeffs.transpose();
      est.poly_coefficients.row(k) = sol.poly_coeffs.transpose();
    }
    est.factorization_count = 1;
    return est;
  }

  est.weights = truncate_weights(subband_weights(dataset.basis, options.smoothness_r),
                                 dataset.channels());
  const double r_max =
      options.table_r_max > 0.0 ? options.table_r_max : 2.5 * std::sqrt(static_cast<double>(d));
  est.tables.reserve(est.weights.groups.size());
  for (const WeightGroup& group : est.weights.groups) {
    const RadialKernelSpec spec{d, options.order, options.alpha, group.value};
    if (cache != nullptr)
      est.tables.push_back(cache->get(spec, r_max, options.table_nodes, options.quad_tol));
    else
      est.tables.push_back(build_table(spec, r_max, options.table_nodes, options.quad_tol));
  }
  GroupedSolveResult solved =
      solve_grouped(est.tables, est.weights, dataset.locations, observations, options.mu);
  est.coefficients = std::move(solved.coefficients);
  est.factorization_count = solved.factorization_count;
  return est;
}

Eigen::VectorXd evaluate_irc(const IrcEstimate& estimate, const Eigen::RowVectorXd& y) {
  const int d = estimate.centers.dim();
  if (y.size() != d) throw ValidationError("evaluate_irc: location dimension mismatch");
  const Eigen::VectorXd dist = distances_to(estimate.centers, y);
  Eigen::VectorXd out(estimate.channels);
  if (estimate.cpd) {
    const double sign = cpd_sign(estimate.order, d);
    Eigen::VectorXd phi(dist.size());
    for (long i = 0; i < dist.size(); ++i)
      phi[i] = sign * polyharmonic(estimate.order, d, dist[i]);
    Eigen::MatrixXd pt(1, d);
    pt.row(0) = y;
    const Eigen::VectorXd pvals = monomial_matrix(pt, estimate.order).row(0).transpose();
    out = estimate.coefficients * phi + estimate.poly_coefficients * pvals;
    return out;
  }
  for (std::size_t g = 0; g < estimate.weights.groups.size(); ++g) {
    Eigen::VectorXd rho(dist.size());
    for (long i = 0; i < dist.size(); ++i) rho[i] = evaluate(estimate.tables[g], dist[i]);
    for (int k : estimate.weights.groups[g].channels)
      out[k] = estimate.coefficients.row(k).dot(rho);
  }
  return out;
}

SvirGrid reconstruct_svir(const IrcEstimate& estimate, const TensorGrid& x_grid,
                          const TensorGrid& y_grid) {
  check_basis_grid(x_grid, estimate.basis);
  if (y_grid.dim() != estimate.centers.dim())
    throw ValidationError("reconstruct_svir: y-grid dimension mismatch");
  SvirGrid out = make_svir_grid(x_grid, y_grid);
  Eigen::VectorXd full = Eigen::VectorXd::Zero(estimate.basis.channels());
  for (long j = 0; j < y_grid.total(); ++j) {
    full.head(estimate.channels) = evaluate_irc(estimate, y_grid.node(j));
    out.values.col(j) = synthesize(CoefficientVector{estimate.basis, full});
  }
  return out;
}

double hilbert_schmidt_error(const SvirGrid& a, const SvirGrid& b) {
  if (!same_grid(a.x_grid, b.x_grid) || !same_grid(a.y_grid, b.y_grid))
    throw ValidationError("hilbert_schmidt_error: grids do not match");
  const double cell = a.x_grid.cell_measure() * a.y_grid.cell_measure();
  return std::sqrt((a.values - b.values).squaredNorm() * cell);
}

// ---------------------------------------------------------------------------
// Product-convolution operator

struct SvirOperator::Impl {
  TensorGrid x_grid;
  TensorGrid y_grid;
  int dim = 1;
  int stencil = 0; // nodes per x-axis
  int center = 0;
  long total = 0; // y-grid nodes
  int channels = 0;
  bool canonical = false;
  Eigen::MatrixXd field; // total x channels

  // FFT path state (wavelet bases).
  int l1 = 0, l2 = 0, spec2 = 0; // padded sizes; spec2 = l2/2+1 (1D: l1/2+1 in spec2)
  long spec_total = 0;
  std::vector<Eigen::VectorXcd> atom_spectra;
  double* rbuf = nullptr;
  fftw_complex* cbuf = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;

  ~Impl() {
    if (fwd != nullptr) fftw_destroy_plan(fwd);
    if (bwd != nullptr) fftw_destroy_plan(bwd);
    if (rbuf != nullptr) fftw_free(rbuf);
    if (cbuf != nullptr) fftw_free(cbuf);
  }

  long real_total() const { return dim == 1 ? l1 : static_cast<long>(l1) * l2; }

  void forward() const { fftw_execute(fwd); }
  void backward() const { fftw_execute(bwd); }
};

SvirOperator::SvirOperator(const IrcEstimate& estimate, const TensorGrid& x_grid,
                           const TensorGrid& y_grid)
    : impl_(std::make_unique<Impl>()) {
  check_basis_grid(x_grid, estimate.basis);
  if (y_grid.dim() != x_grid.dim())
    throw ValidationError("operator x and y grids must share one dimension");
  for (int a = 0; a < x_grid.dim(); ++a)
    if (std::abs(x_grid.spacing[a] - y_grid.spacing[a]) > 1e-12)
      throw ValidationError("operator stencil and image grids must share their spacing");

  Impl& im = *impl_;
  im.x_grid = x_grid;
  im.y_grid = y_grid;
  im.dim = x_grid.dim();
  im.stencil = estimate.basis.signal_length;
  im.center = im.stencil / 2;
  im.total = y_grid.total();
  im.channels = estimate.channels;
  im.canonical = estimate.basis.kind == BasisKind::Canonical;

  // Coefficient field on the whole y-grid, one channel per column.
  im.field.resize(im.total, im.channels);
  const int n = estimate.centers.count();
  Eigen::MatrixXd dist(im.total, n);
  for (long j = 0; j < im.total; ++j)
    dist.row(j) = distances_to(estimate.centers, y_grid.node(j)).transpose();
  if (estimate.cpd) {
    const double sign = cpd_sign(estimate.order, im.dim);
    Eigen::MatrixXd phi(im.total, n);
    for (long j = 0; j < im.total; ++j)
      for (int i = 0; i < n; ++i)
        phi(j, i) = sign * polyharmonic(estimate.order, im.dim, dist(j, i));
    Eigen::MatrixXd nodes(im.total, im.dim);
    for (long j = 0; j < im.total; ++j) nodes.row(j) = y_grid.node(j);
    const Eigen::MatrixXd pvals = monomial_matrix(nodes, estimate.order);
    im.field = phi * estimate.coefficients.transpose() +
               pvals * estimate.poly_coefficients.transpose();
  } else {
    for (std::size_t g = 0; g < estimate.weights.groups.size(); ++g) {
      Eigen::MatrixXd rho(im.total, n);
      for (long j = 0; j < im.total; ++j)
        for (int i = 0; i < n; ++i) rho(j, i) = evaluate(estimate.tables[g], dist(j, i));
      for (int k : estimate.weights.groups[g].channels)
        im.field.col(k) = rho * estimate.coefficients.row(k).transpose();
    }
  }

  if (im.canonical) return;

  // Wavelet path: pad to powers of two covering linear convolution, cache
  // one spectrum per synthesized atom.
  if (im.dim == 1) {
    im.l1 = next_pow2(static_cast<int>(im.total) + im.stencil);
    im.l2 = 1;
    im.spec2 = im.l1 / 2 + 1;
    im.spec_total = im.spec2;
  } else {
    im.l1 = next_pow2(y_grid.shape[0] + im.stencil);
    im.l2 = next_pow2(y_grid.shape[1] + im.stencil);
    im.spec2 = im.l2 / 2 + 1;
    im.spec_total = static_cast<long>(im.l1) * im.spec2;
  }
  im.rbuf = static_cast<double*>(fftw_malloc(sizeof(double) * im.real_total()));
  im.cbuf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * im.spec_total));
  if (im.dim == 1) {
    im.fwd = fftw_plan_dft_r2c_1d(im.l1, im.rbuf, im.cbuf, FFTW_ESTIMATE);
    im.bwd = fftw_plan_dft_c2r_1d(im.l1, im.cbuf, im.rbuf, FFTW_ESTIMATE);
  } else {
    im.fwd = fftw_plan_dft_r2c_2d(im.l1, im.l2, im.rbuf, im.cbuf, FFTW_ESTIMATE);
    im.bwd = fftw_plan_dft_c2r_2d(im.l1, im.l2, im.cbuf, im.rbuf, FFTW_ESTIMATE);
  }

  im.atom_spectra.reserve(estimate.basis.channels());
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(estimate.basis.channels());
  for (int k = 0; k < estimate.channels; ++k) {
    unit[k] = 1.0;
    const Eigen::VectorXd atom = synthesize(CoefficientVector{estimate.basis, unit});
    unit[k] = 0.0;
    std::fill(im.rbuf, im.rbuf + im.real_total(), 0.0);
    if (im.dim == 1) {
      for (int m = 0; m < im.stencil; ++m) im.rbuf[m] = atom[m];
    } else {
      for (int m1 = 0; m1 < im.stencil; ++m1)
        for (int m2 = 0; m2 < im.stencil; ++m2)
          im.rbuf[static_cast<long>(m1) * im.l2 + m2] = atom[m1 * im.stencil + m2];
    }
    im.forward();
    Eigen::VectorXcd spec(im.spec_total);
    for (long s = 0; s < im.spec_total; ++s)
      spec[s] = std::complex<double>(im.cbuf[s][0], im.cbuf[s][1]);
    im.atom_spectra.push_back(std::move(spec));
  }
}

SvirOperator::~SvirOperator() = default;
SvirOperator::SvirOperator(SvirOperator&&) noexcept = default;
SvirOperator& SvirOperator::operator=(SvirOperator&&) noexcept = default;

const TensorGrid& SvirOperator::y_grid() const { return impl_->y_grid; }
const Eigen::MatrixXd& SvirOperator::field() const { return impl_->field; }

Eigen::VectorXd SvirOperator::apply(const Eigen::VectorXd& u) const {
  const Impl& im = *impl_;
  if (u.size() != im.total) throw ValidationError("apply: input does not live on the y-grid");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(im.total);

  if (im.canonical) {
    if (im.dim == 1) {
      const long m = im.total;
      for (int k = 0; k < im.channels; ++k) {
        const long off = k - im.center;
        const long jlo = std::max<long>(0, -off);
        const long jhi = std::min<long>(m, m - off);
        for (long j = jlo; j < jhi; ++j) out[j + off] += im.field(j, k) * u[j];
      }
    } else {
      const long m1 = im.y_grid.shape[0], m2 = im.y_grid.shape[1];
      for (int k = 0; k < im.channels; ++k) {
        const long o1 = k / im.stencil - im.center;
        const long o2 = k % im.stencil - im.center;
        const long lo1 = std::max<long>(0, -o1), hi1 = std::min<long>(m1, m1 - o1);
        const long lo2 = std::max<long>(0, -o2), hi2 = std::min<long>(m2, m2 - o2);
        for (long j1 = lo1; j1 < hi1; ++j1) {
          const long src = j1 * m2, dst = (j1 + o1) * m2 + o2;
          for (long j2 = lo2; j2 < hi2; ++j2)
            out[dst + j2] += im.field(src + j2, k) * u[src + j2];
        }
      }
    }
    return out;
  }

  Eigen::VectorXcd accum = Eigen::VectorXcd::Zero(im.spec_total);
  for (int k = 0; k < im.channels; ++k) {
    std::fill(im.rbuf, im.rbuf + im.real_total(), 0.0);
    if (im.dim == 1) {
      for (long j = 0; j < im.total; ++j) im.rbuf[j] = im.field(j, k) * u[j];
    } else {
      const long m2 = im.y_grid.shape[1];
      for (long j1 = 0; j1 < im.y_grid.shape[0]; ++j1)
        for (long j2 = 0; j2 < m2; ++j2)
          im.rbuf[j1 * im.l2 + j2] = im.field(j1 * m2 + j2, k) * u[j1 * m2 + j2];
    }
    im.forward();
    const Eigen::VectorXcd& spec = im.atom_spectra[k];
    for (long s = 0; s < im.spec_total; ++s)
      accum[s] += std::complex<double>(im.cbuf[s][0], im.cbuf[s][1]) * spec[s];
  }
  for (long s = 0; s < im.spec_total; ++s) {
    im.cbuf[s][0] = accum[s].real();
    im.cbuf[s][1] = accum[s].imag();
  }
  im.backward();
  const double scale = 1.0 / static_cast<double>(im.real_total());
  if (im.dim == 1) {
    for (long p = 0; p < im.total; ++p) out[p] = im.rbuf[p + im.center] * scale;
  } else {
    const long m2 = im.y_grid.shape[1];
    for (long p1 = 0; p1 < im.y_grid.shape[0]; ++p1)
      for (long p2 = 0; p2 < m2; ++p2)
        out[p1 * m2 + p2] = im.rbuf[(p1 + im.center) * im.l2 + p2 + im.center] * scale;
  }
  return out;
}

Eigen::VectorXd SvirOperator::apply_adjoint(const Eigen::VectorXd& v) const {
  const Impl& im = *impl_;
  if (v.size() != im.total)
    throw ValidationError("apply_adjoint: input does not live on the y-grid");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(im.total);

  if (im.canonical) {
    if (im.dim == 1) {
      const long m = im.total;
      for (int k = 0; k < im.channels; ++k) {
        const long off = k - im.center;
        const long jlo = std::max<long>(0, -off);
        const long jhi = std::min<long>(m, m - off);
        for (long j = jlo; j < jhi; ++j) out[j] += im.field(j, k) * v[j + off];
      }
    } else {
      const long m1 = im.y_grid.shape[0], m2 = im.y_grid.shape[1];
      for (int k = 0; k < im.channels; ++k) {
        const long o1 = k / im.stencil - im.center;
        const long o2 = k % im.stencil - im.center;
        const long lo1 = std::max<long>(0, -o1), hi1 = std::min<long>(m1, m1 - o1);
        const long lo2 = std::max<long>(0, -o2), hi2 = std::min<long>(m2, m2 - o2);
        for (long j1 = lo1; j1 < hi1; ++j1) {
          const long src = j1 * m2, dst = (j1 + o1) * m2 + o2;
          for (long j2 = lo2; j2 < hi2; ++j2)
            out[src + j2] += im.field(src + j2, k) * v[dst + j2];
        }
      }
    }
    return out;
  }

  // Shared forward transform of v, then one correlation per channel.
  std::fill(im.rbuf, im.rbuf + im.real_total(), 0.0);
  if (im.dim == 1) {
    for (long j = 0; j < im.total; ++j) im.rbuf[j] = v[j];
  } else {
    const long m2 = im.y_grid.shape[1];
    for (long j1 = 0; j1 < im.y_grid.shape[0]; ++j1)
      for (long j2 = 0; j2 < m2; ++j2) im.rbuf[j1 * im.l2 + j2] = v[j1 * m2 + j2];
  }
  im.forward();
  Eigen::VectorXcd vspec(im.spec_total);
  for (long s = 0; s < im.spec_total; ++s)
    vspec[s] = std::complex<double>(im.cbuf[s][0], im.cbuf[s][1]);

  const double scale = 1.0 / static_cast<double>(im.real_total());
  for (int k = 0; k < im.channels; ++k) {
    const Eigen::VectorXcd& spec = im.atom_spectra[k];
    for (long s = 0; s < im.spec_total; ++s) {
      const std::complex<double> z = vspec[s] * std::conj(spec[s]);
      im.cbuf[s][0] = z.real();
      im.cbuf[s][1] = z.imag();
    }
    im.backward();
    if (im.dim == 1) {
      for (long j = 0; j < im.total; ++j) {
        const long q = (j - im.center + im.l1) % im.l1;
        out[j] += im.field(j, k) * im.rbuf[q] * scale;
      }
    } else {
      const long m2 = im.y_grid.shape[1];
      for (long j1 = 0; j1 < im.y_grid.shape[0]; ++j1) {
        const long q1 = (j1 - im.center + im.l1) % im.l1;
        for (long j2 = 0; j2 < m2; ++j2) {
          const long q2 = (j2 - im.center + im.l2) % im.l2;
          out[j1 * m2 + j2] += im.field(j1 * m2 + j2, k) * im.rbuf[q1 * im.l2 + q2] * scale;
        }
      }
    }
  }
  return out;
}

Eigen::VectorXd apply_operator(const IrcEstimate& estimate, const TensorGrid& x_grid,
                               const TensorGrid& y_grid, const Eigen::VectorXd& u) {
  return SvirOperator(estimate, x_grid, y_grid).apply(u);
}

Eigen::VectorXd apply_operator_adjoint(const IrcEstimate& estimate, const TensorGrid& x_grid,
                                       const TensorGrid& y_grid, const Eigen::VectorXd& v) {
  return SvirOperator(estimate, x_grid, y_grid).apply_adjoint(v);
}

// ---------------------------------------------------------------------------
// Schedules and model selection

namespace {

void check_schedule_args(int n, double sigma2, double alpha, int order, int dim,
                         double constant) {
  if (n < 1) throw ValidationError("schedule: need at least one observation");
  if (sigma2 < 0.0) throw ValidationError("schedule: noise variance must be nonnegative");
  if (!(constant > 0.0)) throw ValidationError("schedule: constant must be positive");
  if (alpha < 0.0 || alpha >= 1.0) throw ValidationError("schedule: alpha must be in [0, 1)");
  if (order < 1) throw ValidationError("schedule: order must be at least 1");
  if (dim != 1 && dim != 2) throw ValidationError("schedule: dimension must be 1 or 2");
}

ScheduleResult floored(double mu) {
  if (mu >= kMuFloor) return {mu, false};
  return {kMuFloor, true};
}

} // namespace

ScheduleResult regularization_schedule(int n, int channels, double sigma2, double alpha,
                                       int order, int dim, double constant) {
  check_schedule_args(n, sigma2, alpha, order, dim, constant);
  if (channels < 1) throw ValidationError("schedule: need at least one channel");
  if (sigma2 == 0.0) return {kMuFloor, true};
  const double s = order;
  const double rate = 2.0 * s / (2.0 * s + dim);
  const double mu = constant * std::pow(channels * sigma2 / n, rate) *
                    std::pow(1.0 - alpha, -dim / (2.0 * s + dim));
  return floored(mu);
}

ScheduleResult regularization_schedule_balanced(int n, double sigma2, double alpha, int order,
                                                double smoothness_r, int dim, double constant) {
  check_schedule_args(n, sigma2, alpha, order, dim, constant);
  if (!(smoothness_r > 0.5 * dim)) throw ValidationError("schedule: need r > dim/2");
  if (sigma2 == 0.0) return {kMuFloor, true};
  const double s = order;
  const double q = smoothness_r * s / (smoothness_r + s);
  const double mu = constant * std::pow(sigma2 / n, 2.0 * q / (2.0 * q + dim)) *
                    std::pow(1.0 - alpha, -dim / (2.0 * s + dim));
  return floored(mu);
}

int channel_schedule(int n, double sigma2, double alpha, int order, double smoothness_r, int dim,
                     double constant, int max_channels) {
  check_schedule_args(n, sigma2, alpha, order, dim, constant);
  if (!(smoothness_r > 0.5 * dim)) throw ValidationError("schedule: need r > dim/2");
  if (max_channels < 4) throw ValidationError("schedule: max_channels must be at least 4");
  if (sigma2 == 0.0) return max_channels;
  const double s = order;
  const double r = smoothness_r;
  const double q = r * s / (r + s);
  const double raw = constant * std::pow(sigma2 / n, -dim * q / (r * (2.0 * q + dim))) *
                     std::pow(1.0 - alpha, (dim * dim + s * dim) * q / (r * s * (2.0 * q + dim)));
  const double exponent = std::round(std::log2(std::max(raw, 1.0)));
  const double rounded = std::pow(2.0, exponent);
  const double clipped = std::clamp(rounded, 4.0, static_cast<double>(max_channels));
  return static_cast<int>(clipped);
}

double select_mu(const PsfDataset& dataset, const FitOptions& options,
                 const std::vector<double>& candidates, int folds, unsigned long seed,
                 KernelTableCache* cache) {
  if (candidates.empty()) throw ValidationError("select_mu: empty candidate grid");
  if (folds < 2) throw ValidationError("select_mu: need at least two folds");
  const int n = dataset.count();
  if (n < folds) throw ValidationError("select_mu: need at least one location per fold");

  std::vector<double> grid = candidates;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  for (double mu : grid)
    if (mu < 0.0) throw ValidationError("select_mu: candidates must be nonnegative");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  KernelTableCache local;
  if (cache == nullptr) cache = &local;

  double best_mu = grid.front();
  double best_score = std::numeric_limits<double>::infinity();
  for (double mu : grid) {
    double score = 0.0;
    for (int f = 0; f < folds; ++f) {
      std::vector<int> train, test;
      for (int i = 0; i < n; ++i) (i % folds == f ? test : train).push_back(order[i]);
      Eigen::MatrixXd train_pts(train.size(), dataset.locations.dim());
      Eigen::MatrixXd train_obs(train.size(), dataset.channels());
      for (std::size_t i = 0; i < train.size(); ++i) {
        train_pts.row(i) = dataset.locations.points.row(train[i]);
        train_obs.row(i) = dataset.observations.row(train[i]);
      }
      PsfDataset part;
      part.locations = LocationSet{train_pts};
      part.basis = dataset.basis;
      part.observations = train_obs;
      part.noise_sigma = dataset.noise_sigma;
      part.seed = dataset.seed;
      FitOptions opts = options;
      opts.mu = mu;
      const IrcEstimate est = fit(part, opts, cache);
      for (int i : test) {
        const Eigen::VectorXd pred = evaluate_irc(est, dataset.locations.points.row(i));
        score += (pred - dataset.observations.row(i).transpose()).squaredNorm();
      }
    }
    if (score < best_score - 1e-15 * std::abs(best_score)) {
      best_score = score;
      best_mu = mu;
    }
  }
  return best_mu;
}

// ---------------------------------------------------------------------------
// Serialization

void save_estimate(const IrcEstimate& estimate, const std::string& manifest_path) {
  namespace fs = std::filesystem;
  fs::path manifest(manifest_path);
  fs::path blob = manifest;
  blob.replace_extension(".blob");

  nlohmann::json j;
  j["version"] = 1;
  j["kind"] = "irc-estimate";
  j["basis"] = {{"kind", to_string(estimate.basis.kind)},
                {"length", estimate.basis.signal_length},
                {"levels", estimate.basis.levels},
                {"dim", estimate.basis.dim}};
  j["channels"] = estimate.channels;
  j["alpha"] = estimate.alpha;
  j["mu"] = estimate.mu;
  j["order"] = estimate.order;
  j["smoothness_r"] = estimate.smoothness_r;
  j["cpd"] = estimate.cpd;
  j["factorization_count"] = estimate.factorization_count;
  j["centers"] = nlohmann::json::parse(location_set_to_json(estimate.centers));
  j["count"] = estimate.centers.count();
  j["poly_dim"] = estimate.cpd ? static_cast<int>(estimate.poly_coefficients.cols()) : 0;
  j["table_count"] = static_cast<int>(estimate.tables.size());
  nlohmann::json groups = nlohmann::json::array();
  for (const WeightGroup& g : estimate.weights.groups)
    groups.push_back({{"weight", g.value}, {"channels", g.channels}});
  j["weight_groups"] = groups;
  j["blob"] = blob.filename().string();

  std::ofstream mf(manifest, std::ios::binary);
  if (!mf) throw ValidationError("cannot write estimate manifest " + manifest_path);
  mf << j.dump(2) << "\n";

  std::ofstream bf(blob, std::ios::binary);
  if (!bf) throw ValidationError("cannot write estimate blob " + blob.string());
  std::string bytes;
  for (int k = 0; k < estimate.coefficients.rows(); ++k)
    for (int i = 0; i < estimate.coefficients.cols(); ++i)
      detail::append_le(bytes, estimate.coefficients(k, i));
  for (int k = 0; k < estimate.poly_coefficients.rows(); ++k)
    for (int i = 0; i < estimate.poly_coefficients.cols(); ++i)
      detail::append_le(bytes, estimate.poly_coefficients(k, i));
  bf.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  for (const KernelTable& table : estimate.tables) write_kernel_blob(bf, table);
}

IrcEstimate load_estimate(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream mf(manifest_path);
  if (!mf) throw ValidationError("cannot open estimate manifest " + manifest_path);
  nlohmann::json j;
  mf >> j;
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw ValidationError("unsupported estimate manifest version");
  if (j.value("kind", "") != "irc-estimate")
    throw ValidationError("manifest is not an irc-estimate");

  IrcEstimate est;
  est.basis = BasisSpec(basis_kind_from_string(j["basis"]["kind"].get<std::string>()),
                        j["basis"]["length"].get<int>(), j["basis"]["levels"].get<int>(),
                        j["basis"]["dim"].get<int>());
  est.channels = j["channels"].get<int>();
  est.alpha = j["alpha"].get<double>();
  est.mu = j["mu"].get<double>();
  est.order = j["order"].get<int>();
  est.smoothness_r = j["smoothness_r"].get<double>();
  est.cpd = j["cpd"].get<bool>();
  est.factorization_count = j["factorization_count"].get<int>();
  est.centers = location_set_from_json(j["centers"].dump());
  if (!est.cpd)
    est.weights = truncate_weights(subband_weights(est.basis, est.smoothness_r), est.channels);

  const int n = j["count"].get<int>();
  if (n != est.centers.count())
    throw ValidationError("estimate manifest count does not match its centers");
  const int poly_dim = j["poly_dim"].get<int>();
  const int table_count = j["table_count"].get<int>();
  if (!est.cpd && table_count != static_cast<int>(est.weights.groups.size()))
    throw ValidationError("estimate blob table count does not match the weight groups");

  fs::path blob = fs::path(manifest_path).parent_path() / j["blob"].get<std::string>();
  std::ifstream bf(blob, std::ios::binary);
  if (!bf) throw ValidationError("cannot open estimate blob " + blob.string());
  est.coefficients.resize(est.channels, n);
  for (int k = 0; k < est.channels; ++k)
    for (int i = 0; i < n; ++i) est.coefficients(k, i) = detail::read_le(bf, "estimate blob");
  if (poly_dim > 0) {
    est.poly_coefficients.resize(est.channels, poly_dim);
    for (int k = 0; k < est.channels; ++k)
      for (int i = 0; i < poly_dim; ++i)
        est.poly_coefficients(k, i) = detail::read_le(bf, "estimate blob");
  }
  est.tables.reserve(table_count);
  for (int t = 0; t < table_count; ++t) est.tables.push_back(read_kernel_blob(bf));
  return est;
}

} // namespace svirkit
