#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "svirkit/deblur.hpp"
#include "svirkit/errors.hpp"
#include "svirkit/image_io.hpp"
#include "svirkit/study.hpp"

using namespace svirkit;

namespace {

StudyConfig small_prescribed_config() {
  StudyConfig config;
  config.phantom = "prescribed";
  config.basis = BasisSpec(BasisKind::Haar, 16, 4, 1);
  config.y_cells = 32;
  config.phantom_r = 1.0;
  config.phantom_seed = 3;
  config.channels = 8;
  config.alpha = 0.3;
  config.order = 2;
  config.smoothness_r = 1.0;
  config.seed = 17;
  return config;
}

} // namespace

TEST_SUITE("study") {

TEST_CASE("log-log slopes come out of least squares") {
  CHECK(fit_loglog_slope({{1.0, 1.0}, {10.0, 0.1}}).slope == doctest::Approx(-1.0).epsilon(1e-13));

  const SlopeFit flat = fit_loglog_slope({{1.0, 2.5}, {2.0, 2.5}, {4.0, 2.5}, {8.0, 2.5}});
  CHECK(flat.slope == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  CHECK(flat.half_width == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  std::vector<std::pair<double, double>> power;
  for (double x : {1.0, 2.0, 4.0, 8.0}) power.emplace_back(x, 3.0 * std::pow(x, -2.0 / 3.0));
  const SlopeFit fitted = fit_loglog_slope(power);
  CHECK(fitted.slope == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
  CHECK(fitted.half_width <= 1e-12);

  // A noisy cloud still brackets the generating slope with its interval.
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss(0.0, 0.05);
  std::vector<std::pair<double, double>> noisy;
  for (double x : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0})
    noisy.emplace_back(x, 2.0 * std::pow(x, -1.5) * std::exp(gauss(rng)));
  const SlopeFit rough = fit_loglog_slope(noisy);
  CHECK(rough.half_width > 0.0);
  CHECK(std::abs(rough.slope - (-1.5)) <= rough.half_width);

  CHECK_THROWS_AS(fit_loglog_slope({{1.0, 1.0}}), ValidationError&);
  CHECK_THROWS_AS(fit_loglog_slope({{1.0, 1.0}, {2.0, -1.0}, {4.0, 1.0}}), ValidationError&);
  CHECK_THROWS_AS(fit_loglog_slope({{1.0, 1.0}, {1.0, 2.0}}), ValidationError&);
}

TEST_CASE("noise-free convergence errors plateau at the truncation floor") {
  StudyConfig config = small_prescribed_config();
  config.n_grid = {32, 64, 128};
  config.sigma = 0.0;
  config.trials = 1;
  config.mu.kind = MuPolicy::Kind::Schedule;

  const StudyResult result = run_convergence_study(config);
  REQUIRE(result.rows.size() == 3);

  const TensorGrid x_grid = TensorGrid::unit_midpoints(16, 1);
  const TensorGrid y_grid = TensorGrid::unit_midpoints(32, 1);
  const PrescribedPhantom phantom =
      prescribed_smoothness_svir(1.0, 2.0, 3, x_grid, y_grid, config.basis);
  const double floor = std::pow(prescribed_truncation_tail(phantom, 8), 2.0);
  for (const StudyRow& row : result.rows) {
    CHECK(row.error_mean >= 0.99 * floor);
    CHECK(row.error_mean <= 1.5 * floor);
    CHECK(row.channels == 8);
    CHECK(row.error_std == 0.0);
  }
  CHECK(std::abs(result.slope.slope) <= 0.15);
}

TEST_CASE("noisy convergence errors shrink with more observations") {
  StudyConfig config = small_prescribed_config();
  config.n_grid = {16, 64, 256};
  config.sigma = 0.1;
  config.trials = 3;
  config.mu.kind = MuPolicy::Kind::Schedule;
  config.mu.value = 1.0;

  const StudyResult result = run_convergence_study(config);
  REQUIRE(result.rows.size() == 3);
  for (const StudyRow& row : result.rows) {
    CHECK(row.error_mean > 0.0);
    CHECK(row.error_std > 0.0); // trials see different noise draws
  }
  CHECK(result.slope.slope < -0.25);

  // The schedule shrinks the penalty as data accumulates.
  CHECK(result.rows[0].mu > result.rows[1].mu);
  CHECK(result.rows[1].mu > result.rows[2].mu);
}

TEST_CASE("studies are reproducible byte for byte") {
  StudyConfig config = small_prescribed_config();
  config.n_grid = {16, 32, 64};
  config.sigma = 0.05;
  config.trials = 2;

  const std::string first = study_csv(run_convergence_study(config), config);
  const std::string second = study_csv(run_convergence_study(config), config);
  CHECK(first == second);

  CHECK(first.rfind("# {\"artifact\":\"svirkit\"", 0) == 0);
  CHECK(first.find("\nn,N,mu,alpha,error_mean,error_std,seed\n") != std::string::npos);

  // The header hash pins the configuration: a different seed changes it.
  StudyConfig other = config;
  other.seed = config.seed + 1;
  const std::string third = study_csv(run_convergence_study(other), other);
  CHECK(third.substr(0, third.find('\n')) != first.substr(0, first.find('\n')));

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "svirkit_study_test";
  fs::create_directories(dir);
  write_study_csv(run_convergence_study(config), config, (dir / "rows.csv").string());
  std::ifstream in(dir / "rows.csv", std::ios::binary);
  const std::string from_disk(std::istreambuf_iterator<char>(in),
                              std::istreambuf_iterator<char>{});
  CHECK(from_disk == first);
  fs::remove_all(dir);
}

TEST_CASE("study configs survive their json form") {
  StudyConfig config = small_prescribed_config();
  config.n_grid = {8, 16};
  config.channel_grid = {4, 8};
  config.sigma = 0.25;
  config.scheme = SamplingScheme::JitteredGrid;
  config.mu.kind = MuPolicy::Kind::CrossValidate;
  config.mu.candidates = {1e-4, 1e-2};
  config.mu.folds = 3;
  config.trials = 4;

  const StudyConfig back = study_config_from_json(study_config_to_json(config));
  CHECK(back.phantom == config.phantom);
  CHECK(back.basis.kind == config.basis.kind);
  CHECK(back.basis.signal_length == config.basis.signal_length);
  CHECK(back.n_grid == config.n_grid);
  CHECK(back.channel_grid == config.channel_grid);
  CHECK(back.sigma == config.sigma);
  CHECK(back.scheme == config.scheme);
  CHECK(back.mu.kind == config.mu.kind);
  CHECK(back.mu.candidates == config.mu.candidates);
  CHECK(back.mu.folds == config.mu.folds);
  CHECK(back.trials == config.trials);
  CHECK(back.seed == config.seed);
  CHECK(study_config_to_json(back) == study_config_to_json(config));

  CHECK_THROWS_AS(study_config_from_json("not json"), ValidationError&);
  CHECK(fnv1a_hash("") == 14695981039346656037ULL);
  CHECK(fnv1a_hash("a") != fnv1a_hash("b"));
}

TEST_CASE("discretization errors fall with the channel budget") {
  StudyConfig config = small_prescribed_config();
  config.basis = BasisSpec(BasisKind::Haar, 32, 5, 1);
  config.y_cells = 64;
  config.n_grid = {256};
  config.channel_grid = {4, 8, 16, 32};
  config.order = 2;

  const StudyResult result = run_discretization_study(config);
  REQUIRE(result.rows.size() == 4);
  for (std::size_t i = 1; i < result.rows.size(); ++i)
    CHECK(result.rows[i].error_mean < result.rows[i - 1].error_mean);

  // The full basis leaves only the estimation error of the kept channels.
  CHECK(result.rows.back().error_mean <= 1e-8);
  CHECK(result.slope.slope < -1.4);

  StudyConfig bad = config;
  bad.channel_grid = {4, 64};
  CHECK_THROWS_AS(run_discretization_study(bad), ValidationError&);
  bad.channel_grid = {8, 8};
  CHECK_THROWS_AS(run_discretization_study(bad), ValidationError&);
}

TEST_CASE("study validation rejects malformed grids") {
  StudyConfig config = small_prescribed_config();
  config.n_grid = {32, 16};
  CHECK_THROWS_AS(run_convergence_study(config), ValidationError&);
  config.n_grid = {16, 32};
  config.trials = 0;
  CHECK_THROWS_AS(run_convergence_study(config), ValidationError&);
  config.trials = 1;
  config.channels = 64;
  CHECK_THROWS_AS(run_convergence_study(config), ValidationError&);
  config.channels = 8;
  config.phantom = "checkerboard";
  CHECK_THROWS_AS(run_convergence_study(config), ValidationError&);
}

TEST_CASE("estimation runs report their geometry and solver work") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "svirkit_run_estimate_test";
  fs::create_directories(dir);

  const BasisSpec basis(BasisKind::Haar, 16, 4, 1);
  const TensorGrid x_grid = TensorGrid::unit_midpoints(16, 1);
  const TensorGrid y_grid = TensorGrid::unit_midpoints(32, 1);
  const PrescribedPhantom phantom = prescribed_smoothness_svir(1.0, 1.0, 5, x_grid, y_grid, basis);
  const LocationSet locs =
      generate_locations(16, BoxDomain::unit(1), SamplingScheme::JitteredGrid, 7);
  const PsfDataset data = sample_prescribed_psfs(phantom, locs, 8, 0.01, 2);
  save_dataset(data, (dir / "data.json").string());

  EstimateRunConfig config;
  config.dataset_path = (dir / "data.json").string();
  config.estimate_path = (dir / "estimate.json").string();
  config.options.alpha = 0.4;
  config.mu.kind = MuPolicy::Kind::Fixed;
  config.mu.value = 1e-4;

  const EstimateRunReport report = run_estimate(config);
  CHECK(report.count == 16);
  CHECK(report.channels == 8);
  CHECK(report.mu == 1e-4);
  CHECK(report.factorization_count == 4); // scaling band plus three detail levels kept
  CHECK(report.geometry.ratio >= 1.0);
  CHECK(report.geometry.ratio <= 3.0); // jittered-grid guarantee
  CHECK(report.elapsed_seconds >= 0.0);

  const IrcEstimate loaded = load_estimate(config.estimate_path);
  CHECK(loaded.channels == 8);
  CHECK(loaded.mu == 1e-4);

  fs::remove_all(dir);
}

TEST_CASE("psnr matches its closed forms") {
  Eigen::MatrixXd a(16, 16);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (long i = 0; i < a.size(); ++i) a.data()[i] = uniform(rng);

  CHECK(psnr(a, a.array() + 0.1, 1.0) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(a, a.array() + 1.0, 1.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(std::isinf(psnr(a, a, 1.0)));

  Eigen::MatrixXd b = a;
  for (long i = 0; i < b.size(); ++i) b.data()[i] += 0.05 * uniform(rng);
  double mse = 0.0;
  for (long i = 0; i < a.size(); ++i) {
    const double diff = a.data()[i] - b.data()[i];
    mse += diff * diff;
  }
  mse /= static_cast<double>(a.size());
  CHECK(psnr(a, b, 2.0) == doctest::Approx(10.0 * std::log10(4.0 / mse)).epsilon(1e-13));

  CHECK_THROWS_AS(psnr(a, Eigen::MatrixXd::Zero(8, 8), 1.0), ValidationError&);
  CHECK_THROWS_AS(psnr(a, a, 0.0), ValidationError&);
}

namespace {

// Small spatially varying blur setup shared by the deblurring tests.
struct MiniBlur {
  TensorGrid image_grid;
  TensorGrid stencil_grid;
  IrcEstimate estimate;

  MiniBlur(int size, int patch) {
    image_grid = TensorGrid::unit_midpoints(size, 2);
    stencil_grid = TensorGrid::centered(patch, 1.0 / size, 2);
    ColumnModel blur = [this, size](const Eigen::RowVectorXd& y) {
      const double sigma = (0.9 + 0.8 * y[1]) / size;
      Eigen::VectorXd column(stencil_grid.total());
      for (long t = 0; t < stencil_grid.total(); ++t)
        column[t] = std::exp(-stencil_grid.node(t).squaredNorm() / (2.0 * sigma * sigma));
      column /= column.sum();
      return column;
    };
    const BasisSpec basis(BasisKind::Canonical, patch, 0, 2);
    const LocationSet locs =
        generate_locations(9, BoxDomain::unit(2), SamplingScheme::MidpointGrid, 1);
    const PsfDataset data =
        sample_psfs_exact(blur, locs, basis, basis.channels(), 0.0, 1);
    FitOptions options;
    options.alpha = 0.0;
    options.order = 2;
    options.mu = 1e-10;
    estimate = fit(data, options);
  }
};

} // namespace

TEST_CASE("the identity operator passes straight through the solver") {
  // A location-independent delta response makes the product convolution the
  // identity, so with no penalty the minimizer is the input itself.
  const int patch = 8;
  const BasisSpec basis(BasisKind::Canonical, patch, 0, 1);
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(patch);
  delta[patch / 2] = 1.0;
  ColumnModel model = [&](const Eigen::RowVectorXd&) { return delta; };
  const LocationSet locs = generate_locations(6, BoxDomain::unit(1), SamplingScheme::Halton, 0);
  const PsfDataset data = sample_psfs_exact(model, locs, basis, patch, 0.0, 1);
  FitOptions options;
  options.alpha = 0.0;
  options.order = 1;
  options.mu = 1e-10;
  const IrcEstimate est = fit(data, options);

  const TensorGrid x_grid = TensorGrid::centered(patch, 0.02, 1);
  const TensorGrid y_grid(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 0.02), {50});
  const SvirOperator op(est, x_grid, y_grid);

  Eigen::VectorXd image(50);
  for (long j = 0; j < 50; ++j) image[j] = 0.3 + 0.5 * std::sin(0.4 * j) + (j > 30 ? 0.2 : 0.0);
  CHECK((op.apply(image) - image).cwiseAbs().maxCoeff() <= 1e-9);

  DeblurOptions solver;
  solver.lambda_tv = 0.0;
  solver.iterations = 400;
  const DeblurResult result = deblur_tv(op, image, solver);
  CHECK((result.restored - image).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("total variation restoration behaves like a proximal flow") {
  const MiniBlur blur(32, 8);
  const SvirOperator op(blur.estimate, blur.stencil_grid, blur.image_grid);

  // Degrade a piecewise constant scene through the operator itself.
  Eigen::VectorXd scene = Eigen::VectorXd::Constant(32 * 32, 0.2);
  for (int i1 = 8; i1 < 20; ++i1)
    for (int i2 = 12; i2 < 26; ++i2) scene[i1 * 32 + i2] = 0.9;
  Eigen::VectorXd degraded = op.apply(scene);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> gauss(0.0, 2e-3);
  for (long j = 0; j < degraded.size(); ++j) degraded[j] += gauss(rng);

  SUBCASE("the adjoint passes the inner-product test") {
    Eigen::VectorXd u(32 * 32), v(32 * 32);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (long j = 0; j < u.size(); ++j) {
      u[j] = unit(rng);
      v[j] = unit(rng);
    }
    const double lhs = op.apply(u).dot(v);
    const double rhs = u.dot(op.apply_adjoint(v));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
  }

  SUBCASE("the objective decreases after burn-in and the image improves") {
    DeblurOptions solver;
    solver.lambda_tv = 3e-4;
    solver.iterations = 150;
    const DeblurResult result = deblur_tv(op, degraded, solver);
    REQUIRE(result.objective.size() == 150);
    for (std::size_t it = 6; it < result.objective.size(); ++it)
      CHECK(result.objective[it] <= result.objective[it - 1] * (1.0 + 1e-9));

    const Eigen::Map<const Eigen::MatrixXd> truth(scene.data(), 32, 32);
    const Eigen::Map<const Eigen::MatrixXd> before(degraded.data(), 32, 32);
    const Eigen::Map<const Eigen::MatrixXd> after(result.restored.data(), 32, 32);
    CHECK(psnr(truth, after, 1.0) > psnr(truth, before, 1.0));
  }

  SUBCASE("an overwhelming penalty flattens the image") {
    DeblurOptions solver;
    solver.lambda_tv = 1e3;
    solver.iterations = 2000;
    const DeblurResult result = deblur_tv(op, degraded, solver);
    const double range = result.restored.maxCoeff() - result.restored.minCoeff();
    const double input_range = degraded.maxCoeff() - degraded.minCoeff();
    CHECK(range <= 0.05 * input_range);
  }

  SUBCASE("inputs must live on the operator grid") {
    DeblurOptions solver;
    CHECK_THROWS_AS(deblur_tv(op, Eigen::VectorXd::Zero(100), solver), ValidationError&);
    solver.lambda_tv = -1.0;
    CHECK_THROWS_AS(deblur_tv(op, degraded, solver), ValidationError&);
  }
}

TEST_CASE("the demonstration pipeline restores detail") {
  DeblurDemoConfig config;
  config.image_size = 48;
  config.patch = 12;
  config.psf_grid = 3;
  config.iterations = 120;
  config.lambda_tv = 3e-4;

  const DeblurDemoReport report = run_deblur_demo(config);
  CHECK(report.truth.rows() == 48);
  CHECK(report.degraded.rows() == 48);
  CHECK(report.restored.rows() == 48);
  CHECK(std::isfinite(report.psnr_degraded));
  CHECK(report.psnr_restored > report.psnr_degraded + 0.3);

  DeblurDemoConfig bad = config;
  bad.patch = 7;
  CHECK_THROWS_AS(run_deblur_demo(bad), ValidationError&);
}

TEST_CASE("pfm images round trip through disk") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "svirkit_image_test";
  fs::create_directories(dir);

  Eigen::MatrixXd image(5, 7);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> uniform(-2.0, 2.0);
  for (long i = 0; i < image.size(); ++i)
    image.data()[i] = static_cast<float>(uniform(rng)); // float values survive exactly

  const std::string path = (dir / "image.pfm").string();
  write_pfm(image, path);
  const Eigen::MatrixXd back = read_pfm(path);
  REQUIRE(back.rows() == 5);
  REQUIRE(back.cols() == 7);
  CHECK((back - image).cwiseAbs().maxCoeff() == 0.0);

  {
    std::ofstream bad(dir / "bad.pfm", std::ios::binary);
    bad << "P5\n2 2\n255\n....";
  }
  CHECK_THROWS_AS(read_pfm((dir / "bad.pfm").string()), ValidationError&);

  Eigen::MatrixXd ramp(1, 3);
  ramp << 0.0, 0.5, 1.0;
  const std::string pgm_path = (dir / "ramp.pgm").string();
  write_pgm(ramp, pgm_path, 0.0, 1.0);
  std::ifstream in(pgm_path, std::ios::binary);
  const std::string bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>{});
  CHECK(bytes == std::string("P5\n3 1\n255\n") + '\0' + '\x80' + '\xff');

  fs::remove_all(dir);
}

} // TEST_SUITE
