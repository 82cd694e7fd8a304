#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <Eigen/Dense>

#include "svirkit/errors.hpp"
#include "svirkit/synthdata.hpp"

using namespace svirkit;

namespace {

double column_mass(const Eigen::VectorXd& column, const TensorGrid& x_grid) {
  return column.sum() * x_grid.cell_measure();
}

double slope_of(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace

TEST_SUITE("synthdata") {

TEST_CASE("tensor grid geometry") {
  const TensorGrid x = TensorGrid::centered(8, 0.25, 1);
  CHECK(x.total() == 8);
  CHECK(x.node(4)[0] == doctest::Approx(0.0));
  CHECK(x.node(0)[0] == doctest::Approx(-1.0));
  CHECK(x.node(7)[0] == doctest::Approx(0.75));

  const TensorGrid y = TensorGrid::unit_midpoints(4, 2);
  CHECK(y.total() == 16);
  CHECK(y.cell_measure() == doctest::Approx(1.0 / 16));
  // Row-major, second axis fastest.
  CHECK(y.node(1)[0] == doctest::Approx(0.125));
  CHECK(y.node(1)[1] == doctest::Approx(0.375));
  CHECK(y.node(4)[0] == doctest::Approx(0.375));
  CHECK(y.node(4)[1] == doctest::Approx(0.125));

  CHECK_THROWS_AS(TensorGrid(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), {4}),
                  ValidationError);
}

TEST_CASE("width laws hit their anchor values") {
  CHECK(gaussian_sigma_1d(GaussianVariant::Narrow, 0.5) == doctest::Approx(0.1));
  CHECK(gaussian_sigma_1d(GaussianVariant::Narrow, 0.0) == doctest::Approx(0.05));
  CHECK(gaussian_sigma_1d(GaussianVariant::Wide, 0.5) == doctest::Approx(2.0));
  CHECK(gaussian_sigma_1d(GaussianVariant::Wide, 1.0) == doctest::Approx(3.0));
  CHECK(gaussian_sigma_2d(0.5) == doctest::Approx(2.0));
  CHECK(gaussian_sigma_2d(0.0) == doctest::Approx(3.0));
  CHECK(gaussian_variant_from_string("narrow") == GaussianVariant::Narrow);
  CHECK(to_string(GaussianVariant::Wide) == "wide");
  CHECK_THROWS_AS(gaussian_variant_from_string("squint"), ValidationError);
}

TEST_CASE("1D Gaussian phantom columns are unit mass and symmetric") {
  SUBCASE("narrow family") {
    const TensorGrid x = TensorGrid::centered(32, 0.025, 1);
    const TensorGrid y = TensorGrid::unit_midpoints(16, 1);
    const SvirGrid phantom = gaussian_svir_1d(GaussianVariant::Narrow, x, y);
    for (long j = 0; j < y.total(); ++j) {
      CHECK(column_mass(phantom.values.col(j), x) == doctest::Approx(1.0).epsilon(1e-3));
      for (int m = 1; m < 32; ++m)
        CHECK(std::abs(phantom.values(m, j) - phantom.values(32 - m, j)) <= 1e-12);
    }
  }
  SUBCASE("wide family") {
    const TensorGrid x = TensorGrid::centered(64, 0.375, 1);
    const TensorGrid y = TensorGrid::unit_midpoints(8, 1);
    const SvirGrid phantom = gaussian_svir_1d(GaussianVariant::Wide, x, y);
    for (long j = 0; j < y.total(); ++j)
      CHECK(column_mass(phantom.values.col(j), x) == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("2D Gaussian phantom varies along the first coordinate only") {
  const TensorGrid x = TensorGrid::centered(64, 0.36, 2);
  const TensorGrid y = TensorGrid::unit_midpoints(4, 2);
  const SvirGrid phantom = gaussian_svir_2d(x, y);
  // Columns j = 4*i1 + i2 share i1: identical bytes for equal first
  // coordinate.
  for (int i1 = 0; i1 < 4; ++i1)
    for (int i2 = 1; i2 < 4; ++i2)
      CHECK((phantom.values.col(4 * i1 + i2) - phantom.values.col(4 * i1)).cwiseAbs().maxCoeff() ==
            0.0);
  CHECK(column_mass(phantom.values.col(0), x) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(column_mass(phantom.values.col(5), x) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("prescribed phantom is deterministic and decays at the stated rate") {
  const TensorGrid x = TensorGrid::centered(64, 0.1, 1);
  const TensorGrid y = TensorGrid::unit_midpoints(64, 1);
  const BasisSpec basis{BasisKind::Daubechies4, 64, 4, 1};
  const PrescribedPhantom a = prescribed_smoothness_svir(1.0, 1.0, 11, x, y, basis);
  const PrescribedPhantom b = prescribed_smoothness_svir(1.0, 1.0, 11, x, y, basis);
  CHECK((a.grid.values - b.grid.values).cwiseAbs().maxCoeff() == 0.0);
  const PrescribedPhantom c = prescribed_smoothness_svir(1.0, 1.0, 12, x, y, basis);
  CHECK((a.grid.values - c.grid.values).cwiseAbs().maxCoeff() > 0.0);

  // Root-mean-square coefficient magnitude per channel, measured back from
  // the synthesized grid, follows (k+1)^{-(2r+d)/(2d)}.
  std::vector<double> logk, logv;
  Eigen::MatrixXd coeffs(64, y.total());
  for (long j = 0; j < y.total(); ++j)
    coeffs.col(j) = analyze(a.grid.values.col(j), basis).values;
  for (int k = 0; k < 64; ++k) {
    const double rms = std::sqrt(coeffs.row(k).squaredNorm() / y.total());
    logk.push_back(std::log(static_cast<double>(k + 1)));
    logv.push_back(std::log(rms));
  }
  const double slope = slope_of(logk, logv);
  const double target = -(2.0 * 1.0 + 1.0) / 2.0;
  CHECK(std::abs(slope - target) <= 0.05 * std::abs(target));

  // Large r concentrates all energy in the first channel.
  const PrescribedPhantom steep = prescribed_smoothness_svir(10.0, 1.0, 11, x, y, basis);
  CHECK(steep.amplitudes[1] / steep.amplitudes[0] < 1e-3);
}

TEST_CASE("truncation tail matches the direct grid quadrature") {
  const TensorGrid x = TensorGrid::centered(32, 0.2, 1);
  const TensorGrid y = TensorGrid::unit_midpoints(32, 1);
  const BasisSpec basis{BasisKind::Haar, 32, 5, 1};
  const PrescribedPhantom phantom = prescribed_smoothness_svir(1.0, 1.0, 5, x, y, basis);

  for (int keep : {4, 8, 16}) {
    SvirGrid truncated = make_svir_grid(x, y);
    for (long j = 0; j < y.total(); ++j) {
      const CoefficientVector full = analyze(phantom.grid.values.col(j), basis);
      truncated.values.col(j) = synthesize(truncate(full, keep));
    }
    const double cell = x.cell_measure() * y.cell_measure();
    const double direct =
        std::sqrt((phantom.grid.values - truncated.values).squaredNorm() * cell);
    CHECK(prescribed_truncation_tail(phantom, keep) ==
          doctest::Approx(direct).epsilon(1e-10));
  }
  CHECK(prescribed_truncation_tail(phantom, 32) == 0.0);
}

TEST_CASE("noise-free sampling on grid nodes reproduces analysis coefficients") {
  const TensorGrid x = TensorGrid::centered(32, 0.05, 1);
  const TensorGrid y = TensorGrid::unit_midpoints(16, 1);
  const BasisSpec basis{BasisKind::Haar, 32, 3, 1};
  const SvirGrid phantom = gaussian_svir_1d(GaussianVariant::Narrow, x, y);

  Eigen::MatrixXd pts(3, 1);
  pts << y.node(2)[0], y.node(7)[0], y.node(12)[0];
  const LocationSet locs{pts};
  const PsfDataset data = sample_psfs(phantom, locs, basis, 12, 0.0, 1);
  CHECK(data.count() == 3);
  CHECK(data.channels() == 12);
  const long cols[3] = {2, 7, 12};
  for (int i = 0; i < 3; ++i) {
    const Eigen::VectorXd expect = analyze(phantom.values.col(cols[i]), basis).values.head(12);
    CHECK((data.observations.row(i).transpose() - expect).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("grid interpolation path tracks the exact path between nodes") {
  const TensorGrid x = TensorGrid::centered(64, 0.02, 1);
  const TensorGrid y = TensorGrid::unit_midpoints(64, 1);
  const BasisSpec basis{BasisKind::Haar, 64, 4, 1};
  const SvirGrid phantom = gaussian_svir_1d(GaussianVariant::Narrow, x, y);

  Eigen::MatrixXd pts(4, 1);
  pts << 0.13, 0.402, 0.655, 0.91;
  const LocationSet locs{pts};
  const PsfDataset interp = sample_psfs(phantom, locs, basis, 64, 0.0, 1);
  const ColumnModel model = [&](const Eigen::RowVectorXd& loc) {
    return gaussian_column_1d(GaussianVariant::Narrow, x, loc[0]);
  };
  const PsfDataset exact = sample_psfs_exact(model, locs, basis, 64, 0.0, 1);
  const double gap = (interp.observations - exact.observations).cwiseAbs().maxCoeff();
  CHECK(gap > 0.0);       // genuinely different paths
  CHECK(gap <= 5e-3);     // second-order in the y-grid spacing
}

TEST_CASE("prescribed sampling is exact and bypasses the grid") {
  const TensorGrid x = TensorGrid::centered(32, 0.1, 1);
  const TensorGrid y = TensorGrid::unit_midpoints(32, 1);
  const BasisSpec basis{BasisKind::Haar, 32, 5, 1};
  const PrescribedPhantom phantom = prescribed_smoothness_svir(1.5, 1.0, 3, x, y, basis);
  const BoxDomain box = BoxDomain::unit(1);
  const LocationSet locs = generate_locations(10, box, SamplingScheme::Halton, 0);
  const PsfDataset data = sample_prescribed_psfs(phantom, locs, 8, 0.0, 4);
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd expect = prescribed_coefficients(phantom, locs.point(i), 8);
    CHECK((data.observations.row(i).transpose() - expect).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("noise is reproducible and has the stated variance") {
  const TensorGrid x = TensorGrid::centered(16, 0.05, 1);
  const TensorGrid y = TensorGrid::unit_midpoints(16, 1);
  const BasisSpec basis{BasisKind::Haar, 16, 2, 1};
  const SvirGrid phantom = gaussian_svir_1d(GaussianVariant::Narrow, x, y);
  const BoxDomain box = BoxDomain::unit(1);
  const LocationSet locs = generate_locations(100, box, SamplingScheme::UniformRandom, 21);

  const PsfDataset clean = sample_psfs(phantom, locs, basis, 1, 0.0, 7);
  const PsfDataset noisy = sample_psfs(phantom, locs, basis, 1, 0.1, 7);
  const PsfDataset again = sample_psfs(phantom, locs, basis, 1, 0.1, 7);
  CHECK((noisy.observations - again.observations).cwiseAbs().maxCoeff() == 0.0);
  const PsfDataset other = sample_psfs(phantom, locs, basis, 1, 0.1, 8);
  CHECK((noisy.observations - other.observations).cwiseAbs().maxCoeff() > 0.0);

  const Eigen::VectorXd eps = noisy.observations.col(0) - clean.observations.col(0);
  const double mean = eps.mean();
  const double var = (eps.array() - mean).square().sum() / (eps.size() - 1);
  CHECK(var >= 0.005);
  CHECK(var <= 0.02);
}

TEST_CASE("locations outside the phantom domain are rejected") {
  const TensorGrid x = TensorGrid::centered(16, 0.05, 1);
  const TensorGrid y = TensorGrid::unit_midpoints(8, 1);
  const BasisSpec basis{BasisKind::Haar, 16, 2, 1};
  const SvirGrid phantom = gaussian_svir_1d(GaussianVariant::Narrow, x, y);
  Eigen::MatrixXd pts(1, 1);
  pts << 1.2;
  CHECK_THROWS_AS(sample_psfs(phantom, LocationSet{pts}, basis, 4, 0.0, 1), ValidationError);
  pts << -0.2;
  CHECK_THROWS_AS(sample_psfs(phantom, LocationSet{pts}, basis, 4, 0.0, 1), ValidationError);
}

TEST_CASE("dataset files round-trip bit exactly") {
  const TensorGrid x = TensorGrid::centered(32, 0.1, 1);
  const TensorGrid y = TensorGrid::unit_midpoints(32, 1);
  const BasisSpec basis{BasisKind::Daubechies4, 32, 3, 1};
  const PrescribedPhantom phantom = prescribed_smoothness_svir(1.0, 1.0, 9, x, y, basis);
  const LocationSet locs = generate_locations(12, BoxDomain::unit(1), SamplingScheme::JitteredGrid, 5);
  const PsfDataset data = sample_prescribed_psfs(phantom, locs, 16, 0.05, 77);

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "svirkit_synthdata_test";
  fs::create_directories(dir);
  const std::string manifest = (dir / "set.json").string();
  save_dataset(data, manifest);
  const PsfDataset loaded = load_dataset(manifest);

  CHECK(loaded.basis == data.basis);
  CHECK(loaded.noise_sigma == data.noise_sigma);
  CHECK(loaded.seed == data.seed);
  CHECK(loaded.count() == data.count());
  CHECK((loaded.observations - data.observations).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.locations.points - data.locations.points).cwiseAbs().maxCoeff() == 0.0);
  fs::remove_all(dir);
}

TEST_CASE("sampling validation") {
  const TensorGrid x = TensorGrid::centered(16, 0.05, 1);
  const TensorGrid y = TensorGrid::unit_midpoints(8, 1);
  const BasisSpec basis{BasisKind::Haar, 16, 2, 1};
  const SvirGrid phantom = gaussian_svir_1d(GaussianVariant::Narrow, x, y);
  const LocationSet locs = generate_locations(4, BoxDomain::unit(1), SamplingScheme::Halton, 0);
  CHECK_THROWS_AS(sample_psfs(phantom, locs, basis, 17, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(sample_psfs(phantom, locs, basis, 0, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(sample_psfs(phantom, locs, BasisSpec{BasisKind::Haar, 32, 2, 1}, 4, 0.0, 1),
                  ValidationError);
  CHECK_THROWS_AS(sample_psfs(phantom, locs, basis, 4, -0.1, 1), ValidationError);
  CHECK_THROWS_AS(prescribed_smoothness_svir(-1.0, 1.0, 0, x, y, basis), ValidationError);
}

} // TEST_SUITE
