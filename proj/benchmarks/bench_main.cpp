// Microbenchmarks for the hot paths: kernel tabulation, Gram assembly,
// the grouped solve against per-channel factorization, operator application
// on both the shift-add and spectral paths, and the wavelet transforms.

#include <cmath>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "svirkit/basis.hpp"
#include "svirkit/estimator.hpp"
#include "svirkit/geometry.hpp"
#include "svirkit/grid.hpp"
#include "svirkit/kernel.hpp"
#include "svirkit/solver.hpp"
#include "svirkit/synthdata.hpp"

namespace {

using namespace svirkit;

Eigen::VectorXd random_vector(long size, unsigned long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(size);
  for (long i = 0; i < size; ++i) v[i] = gauss(rng);
  return v;
}

const KernelTable& unit_table() {
  static const KernelTable table = build_table(RadialKernelSpec{1, 1, 0.3, 2.0}, 2.5, 2048);
  return table;
}

LocationSet halton_sites(int n, int dim) {
  return generate_locations(n, BoxDomain::unit(dim), SamplingScheme::Halton, 0);
}

// Smooth synthetic fit shared by the operator benchmarks.  The spectral
// variant keeps a wavelet basis with a handful of weight groups; the
// canonical variant runs the weight-free conditionally positive definite
// path so no per-channel tables enter the setup.
IrcEstimate bench_estimate(const BasisSpec& basis, int channels, double alpha) {
  const LocationSet locs = halton_sites(8, basis.dim);
  const Eigen::VectorXd base =
      random_vector(static_cast<long>(std::pow(basis.signal_length, basis.dim)), 11);
  const Eigen::VectorXd sway = random_vector(base.size(), 12);
  ColumnModel model = [&](const Eigen::RowVectorXd& y) {
    return Eigen::VectorXd(base + std::sin(2.0 * y.sum()) * sway);
  };
  const PsfDataset data = sample_psfs_exact(model, locs, basis, channels, 0.0, 1);
  FitOptions options;
  options.alpha = alpha;
  options.mu = 1e-4;
  options.order = 2;
  options.smoothness_r = 2.0;
  options.table_r_max = 4.0;
  return fit(data, options);
}

void BM_KernelTableBuild(benchmark::State& state) {
  const int nodes = static_cast<int>(state.range(0));
  const RadialKernelSpec spec{1, 1, 0.3, 2.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_table(spec, 2.5, nodes));
  }
}
BENCHMARK(BM_KernelTableBuild)->Arg(256)->Arg(1024);

void BM_GramAssembly(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const LocationSet centers = halton_sites(n, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(assemble_gram(unit_table(), centers, 1e-3));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_GramAssembly)->RangeMultiplier(2)->Range(64, 512)->Complexity(benchmark::oNSquared);

// 64 wavelet channels share 7 subband weights, so the grouped solve needs 7
// factorizations where the naive loop pays for 64.
void BM_GroupedSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const BasisSpec basis(BasisKind::Haar, 64, 6, 1);
  const WeightSequence weights = truncate_weights(subband_weights(basis, 1.0), 64);
  const LocationSet centers = halton_sites(n, 1);
  std::vector<KernelTable> tables;
  for (const auto& group : weights.groups)
    tables.push_back(build_table(RadialKernelSpec{1, 1, 0.3, group.value}, 2.5, 2048));
  Eigen::MatrixXd obs(64, n);
  for (long k = 0; k < 64; ++k) obs.row(k) = random_vector(n, 100 + k).transpose();
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_grouped(tables, weights, centers, obs, 1e-3));
  }
}
BENCHMARK(BM_GroupedSolve)->Arg(128)->Arg(256);

void BM_PerChannelSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const BasisSpec basis(BasisKind::Haar, 64, 6, 1);
  const WeightSequence weights = truncate_weights(subband_weights(basis, 1.0), 64);
  const LocationSet centers = halton_sites(n, 1);
  std::vector<KernelTable> tables;
  for (const auto& group : weights.groups)
    tables.push_back(build_table(RadialKernelSpec{1, 1, 0.3, group.value}, 2.5, 2048));
  Eigen::MatrixXd obs(64, n);
  for (long k = 0; k < 64; ++k) obs.row(k) = random_vector(n, 100 + k).transpose();
  for (auto _ : state) {
    Eigen::MatrixXd out(64, n);
    for (std::size_t g = 0; g < weights.groups.size(); ++g)
      for (int k : weights.groups[g].channels) {
        const ChannelFactorization fact =
            factorize(assemble_gram(tables[g], centers, 1e-3), weights.groups[g].value);
        out.row(k) = solve_channel(fact, obs.row(k).transpose()).transpose();
      }
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_PerChannelSolve)->Arg(128)->Arg(256);

void BM_EvaluateIrc(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const BasisSpec basis(BasisKind::Haar, 64, 6, 1);
  const LocationSet locs = halton_sites(n, 1);
  Eigen::MatrixXd obs(n, 64);
  for (long i = 0; i < n; ++i) obs.row(i) = random_vector(64, 200 + i).transpose();
  PsfDataset data{locs, basis, obs, 0.0, 0};
  FitOptions options;
  options.alpha = 0.3;
  options.mu = 1e-3;
  const IrcEstimate est = fit(data, options);
  Eigen::RowVectorXd y(1);
  y << 0.37;
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_irc(est, y));
  }
}
BENCHMARK(BM_EvaluateIrc)->Arg(64)->Arg(256);

void BM_OperatorApplySpectral2D(benchmark::State& state) {
  const int cells = static_cast<int>(state.range(0));
  const BasisSpec basis(BasisKind::Haar, 16, 4, 2);
  const IrcEstimate est = bench_estimate(basis, 16, 0.5);
  const TensorGrid y_grid = TensorGrid::unit_midpoints(cells, 2);
  const TensorGrid x_grid = TensorGrid::centered(16, y_grid.spacing[0], 2);
  const SvirOperator op(est, x_grid, y_grid);
  const Eigen::VectorXd u = random_vector(static_cast<long>(cells) * cells, 31);
  for (auto _ : state) {
    benchmark::DoNotOptimize(op.apply(u));
  }
}
BENCHMARK(BM_OperatorApplySpectral2D)->Arg(64)->Arg(128);

void BM_OperatorApplyCanonical2D(benchmark::State& state) {
  const int cells = static_cast<int>(state.range(0));
  const BasisSpec basis(BasisKind::Canonical, 16, 0, 2);
  const IrcEstimate est = bench_estimate(basis, 256, 0.0);
  const TensorGrid y_grid = TensorGrid::unit_midpoints(cells, 2);
  const TensorGrid x_grid = TensorGrid::centered(16, y_grid.spacing[0], 2);
  const SvirOperator op(est, x_grid, y_grid);
  const Eigen::VectorXd u = random_vector(static_cast<long>(cells) * cells, 32);
  for (auto _ : state) {
    benchmark::DoNotOptimize(op.apply(u));
  }
}
BENCHMARK(BM_OperatorApplyCanonical2D)->Arg(64)->Arg(128);

void BM_WaveletAnalyze(benchmark::State& state) {
  const BasisSpec basis(state.range(0) == 0 ? BasisKind::Haar : BasisKind::Daubechies4, 4096, 8, 1);
  const Eigen::VectorXd signal = random_vector(4096, 41);
  for (auto _ : state) {
    benchmark::DoNotOptimize(analyze(signal, basis));
  }
}
BENCHMARK(BM_WaveletAnalyze)->Arg(0)->Arg(1);

void BM_WaveletSynthesize(benchmark::State& state) {
  const BasisSpec basis(state.range(0) == 0 ? BasisKind::Haar : BasisKind::Daubechies4, 4096, 8, 1);
  const CoefficientVector coeffs{basis, random_vector(4096, 42)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(synthesize(coeffs));
  }
}
BENCHMARK(BM_WaveletSynthesize)->Arg(0)->Arg(1);

} // namespace

BENCHMARK_MAIN();
