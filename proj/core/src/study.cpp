#include "svirkit/study.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "svirkit/errors.hpp"

namespace svirkit {

namespace {

constexpr const char* kArtifactVersion = "0.1.0";

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct PhantomBundle {
  SvirGrid grid;
  PrescribedPhantom prescribed;
  ColumnModel model; // set only for the gaussian families
  bool is_prescribed = false;
};

PhantomBundle build_phantom(const StudyConfig& config, const TensorGrid& x_grid,
                            const TensorGrid& y_grid) {
  PhantomBundle bundle;
  if (config.phantom == "prescribed") {
    bundle.prescribed = prescribed_smoothness_svir(config.phantom_r, config.order,
                                                   config.phantom_seed, x_grid, y_grid,
                                                   config.basis);
    bundle.grid = bundle.prescribed.grid;
    bundle.is_prescribed = true;
    return bundle;
  }
  const int dim = config.basis.dim;
  if (config.phantom == "gaussian-narrow" || config.phantom == "gaussian-wide") {
    const GaussianVariant variant = config.phantom == "gaussian-narrow"
                                        ? GaussianVariant::Narrow
                                        : GaussianVariant::Wide;
    if (dim == 1) {
      bundle.grid = gaussian_svir_1d(variant, x_grid, y_grid);
      bundle.model = [variant, x_grid](const Eigen::RowVectorXd& y) {
        return gaussian_column_1d(variant, x_grid, y[0]);
      };
    } else {
      if (variant == GaussianVariant::Narrow)
        throw ValidationError("the 2d gaussian family only has the wide width law");
      bundle.grid = gaussian_svir_2d(x_grid, y_grid);
      bundle.model = [x_grid](const Eigen::RowVectorXd& y) {
        return gaussian_column_2d(x_grid, y);
      };
    }
    return bundle;
  }
  throw ValidationError("unknown phantom family " + config.phantom);
}

PsfDataset draw_dataset(const PhantomBundle& phantom, const StudyConfig& config,
                        const LocationSet& locations, int channels, double sigma,
                        unsigned long seed) {
  if (phantom.is_prescribed)
    return sample_prescribed_psfs(phantom.prescribed, locations, channels, sigma, seed);
  return sample_psfs_exact(phantom.model, locations, config.basis, channels, sigma, seed);
}

double resolve_mu(const MuPolicy& policy, const PsfDataset& dataset, const FitOptions& options,
                  double sigma, unsigned long seed, KernelTableCache* cache) {
  switch (policy.kind) {
    case MuPolicy::Kind::Fixed:
      return policy.value;
    case MuPolicy::Kind::Schedule:
      return regularization_schedule(dataset.count(), dataset.channels(), sigma * sigma,
                                     options.alpha, options.order, dataset.locations.dim(),
                                     policy.value)
          .mu;
    case MuPolicy::Kind::CrossValidate:
      return select_mu(dataset, options, policy.candidates, policy.folds, seed, cache);
  }
  throw ValidationError("unknown penalty policy");
}

double sample_std(const std::vector<double>& values, double mean) {
  if (values.size() < 2) return 0.0;
  double accum = 0.0;
  for (double v : values) accum += (v - mean) * (v - mean);
  return std::sqrt(accum / (static_cast<double>(values.size()) - 1.0));
}

void check_common(const StudyConfig& config) {
  if (config.trials < 1) throw ValidationError("study needs at least one trial");
  if (config.channels < 1 || config.channels > config.basis.channels())
    throw ValidationError("study channel count must fit inside the basis");
  if (config.y_cells < 2) throw ValidationError("study needs at least two y-grid cells");
  if (config.sigma < 0.0) throw ValidationError("study noise level must be nonnegative");
}

void check_increasing(const std::vector<int>& grid, const char* what) {
  if (grid.empty()) throw ValidationError(std::string(what) + " grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 1) throw ValidationError(std::string(what) + " grid entries must be positive");
    if (i > 0 && grid[i] <= grid[i - 1])
      throw ValidationError(std::string(what) + " grid must be strictly increasing");
  }
}

} // namespace

SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& rows) {
  if (rows.size() < 2) throw ValidationError("slope fit needs at least two rows");
  const long m = static_cast<long>(rows.size());
  Eigen::VectorXd lx(m), ly(m);
  for (long i = 0; i < m; ++i) {
    if (rows[i].first <= 0.0 || rows[i].second <= 0.0)
      throw ValidationError("slope fit needs positive coordinates");
    lx[i] = std::log(rows[i].first);
    ly[i] = std::log(rows[i].second);
  }
  const double mx = lx.mean();
  const double my = ly.mean();
  const Eigen::VectorXd cx = lx.array() - mx;
  const double sxx = cx.squaredNorm();
  if (sxx == 0.0) throw ValidationError("slope fit needs at least two distinct x values");
  SlopeFit fit;
  fit.slope = cx.dot(ly - Eigen::VectorXd::Constant(m, my)) / sxx;
  if (m == 2) return fit; // a two-point line has no residual degrees of freedom
  const Eigen::VectorXd residual =
      ly - Eigen::VectorXd::Constant(m, my - fit.slope * mx) - fit.slope * lx;
  const double variance = residual.squaredNorm() / static_cast<double>(m - 2);
  fit.half_width = 1.959963984540054 * std::sqrt(variance / sxx);
  return fit;
}

StudyResult run_convergence_study(const StudyConfig& config) {
  check_common(config);
  check_increasing(config.n_grid, "sample-count");

  const int dim = config.basis.dim;
  const TensorGrid x_grid = TensorGrid::unit_midpoints(config.basis.signal_length, dim);
  const TensorGrid y_grid = TensorGrid::unit_midpoints(config.y_cells, dim);
  const PhantomBundle phantom = build_phantom(config, x_grid, y_grid);
  const BoxDomain box = BoxDomain::unit(dim);

  FitOptions options;
  options.alpha = config.alpha;
  options.order = config.order;
  options.smoothness_r = config.smoothness_r;
  options.table_r_max = config.table_r_max;

  KernelTableCache cache;
  StudyResult result;
  for (int n : config.n_grid) {
    std::vector<double> errors, mus;
    errors.reserve(config.trials);
    for (int trial = 0; trial < config.trials; ++trial) {
      const unsigned long trial_seed = config.seed + static_cast<unsigned long>(trial);
      const LocationSet locations = generate_locations(n, box, config.scheme, trial_seed);
      const PsfDataset dataset =
          draw_dataset(phantom, config, locations, config.channels, config.sigma, trial_seed);
      FitOptions opts = options;
      opts.mu = resolve_mu(config.mu, dataset, options, config.sigma, trial_seed, &cache);
      const IrcEstimate estimate = fit(dataset, opts, &cache);
      const SvirGrid recon = reconstruct_svir(estimate, x_grid, y_grid);
      const double err = hilbert_schmidt_error(recon, phantom.grid);
      errors.push_back(err * err);
      mus.push_back(opts.mu);
    }
    StudyRow row;
    row.n = n;
    row.channels = config.channels;
    row.mu = std::accumulate(mus.begin(), mus.end(), 0.0) / mus.size();
    row.alpha = config.alpha;
    row.error_mean = std::accumulate(errors.begin(), errors.end(), 0.0) / errors.size();
    row.error_std = sample_std(errors, row.error_mean);
    row.seed = config.seed;
    result.rows.push_back(row);
  }

  std::vector<std::pair<double, double>> points;
  for (const StudyRow& row : result.rows) points.emplace_back(row.n, row.error_mean);
  result.slope = fit_loglog_slope(points);
  return result;
}

StudyResult run_discretization_study(const StudyConfig& config) {
  check_common(config);
  check_increasing(config.n_grid, "sample-count");
  check_increasing(config.channel_grid, "channel");
  if (config.channel_grid.back() > config.basis.channels())
    throw ValidationError("channel grid exceeds the basis size");

  const int dim = config.basis.dim;
  const TensorGrid x_grid = TensorGrid::unit_midpoints(config.basis.signal_length, dim);
  const TensorGrid y_grid = TensorGrid::unit_midpoints(config.y_cells, dim);
  const PhantomBundle phantom = build_phantom(config, x_grid, y_grid);
  const BoxDomain box = BoxDomain::unit(dim);
  const int n = config.n_grid.back();

  FitOptions options;
  options.alpha = config.alpha;
  options.order = config.order;
  options.smoothness_r = config.smoothness_r;
  options.table_r_max = config.table_r_max;

  // Discretization error is isolated from noise: the sampling is exact and
  // dense, and the penalty sits at its floor unless the policy fixes it.
  // Dense noise-free Gram systems run close to singular, so the tables are
  // tightened and the ridge keeps a small conditioning floor.
  options.table_nodes = std::max(options.table_nodes, 8192);
  options.quad_tol = std::min(options.quad_tol, 1e-12);
  KernelTableCache cache;
  StudyResult result;
  const LocationSet locations = generate_locations(n, box, config.scheme, config.seed);
  for (int channels : config.channel_grid) {
    const PsfDataset dataset = draw_dataset(phantom, config, locations, channels, 0.0, config.seed);
    FitOptions opts = options;
    opts.mu = config.mu.kind == MuPolicy::Kind::Fixed
                  ? config.mu.value
                  : std::max(regularization_schedule(n, channels, 0.0, config.alpha, config.order,
                                                     dim, std::max(config.mu.value, 1e-300))
                                 .mu,
                             1e-10);
    const IrcEstimate estimate = fit(dataset, opts, &cache);
    const SvirGrid recon = reconstruct_svir(estimate, x_grid, y_grid);
    const double err = hilbert_schmidt_error(recon, phantom.grid);

    StudyRow row;
    row.n = n;
    row.channels = channels;
    row.mu = opts.mu;
    row.alpha = config.alpha;
    row.error_mean = err * err;
    row.error_std = 0.0;
    row.seed = config.seed;
    result.rows.push_back(row);
  }

  std::vector<std::pair<double, double>> points;
  for (const StudyRow& row : result.rows) points.emplace_back(row.channels, row.error_mean);
  result.slope = fit_loglog_slope(points);
  return result;
}

std::string study_config_to_json(const StudyConfig& config) {
  nlohmann::json j;
  j["phantom"] = config.phantom;
  j["basis"] = {{"kind", to_string(config.basis.kind)},
                {"length", config.basis.signal_length},
                {"levels", config.basis.levels},
                {"dim", config.basis.dim}};
  j["y_cells"] = config.y_cells;
  j["phantom_r"] = config.phantom_r;
  j["phantom_seed"] = config.phantom_seed;
  j["n_grid"] = config.n_grid;
  j["channel_grid"] = config.channel_grid;
  j["channels"] = config.channels;
  j["sigma"] = config.sigma;
  j["alpha"] = config.alpha;
  j["order"] = config.order;
  j["smoothness_r"] = config.smoothness_r;
  j["table_r_max"] = config.table_r_max;
  j["scheme"] = to_string(config.scheme);
  nlohmann::json mu;
  switch (config.mu.kind) {
    case MuPolicy::Kind::Schedule: mu["kind"] = "schedule"; break;
    case MuPolicy::Kind::Fixed: mu["kind"] = "fixed"; break;
    case MuPolicy::Kind::CrossValidate: mu["kind"] = "cross-validate"; break;
  }
  mu["value"] = config.mu.value;
  mu["candidates"] = config.mu.candidates;
  mu["folds"] = config.mu.folds;
  j["mu"] = mu;
  j["trials"] = config.trials;
  j["seed"] = config.seed;
  return j.dump();
}

MuPolicy mu_policy_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  MuPolicy policy;
  const std::string kind = j.value("kind", "schedule");
  if (kind == "schedule")
    policy.kind = MuPolicy::Kind::Schedule;
  else if (kind == "fixed")
    policy.kind = MuPolicy::Kind::Fixed;
  else if (kind == "cross-validate")
    policy.kind = MuPolicy::Kind::CrossValidate;
  else
    throw ValidationError("unknown penalty policy " + kind);
  policy.value = j.value("value", 1.0);
  policy.candidates = j.value("candidates", std::vector<double>{});
  policy.folds = j.value("folds", 5);
  return policy;
}

StudyConfig study_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& err) {
    throw ValidationError(std::string("study config is not valid JSON: ") + err.what());
  }
  StudyConfig config;
  config.phantom = j.value("phantom", config.phantom);
  if (j.contains("basis")) {
    const nlohmann::json& b = j["basis"];
    config.basis = BasisSpec(basis_kind_from_string(b.value("kind", "haar")),
                             b.value("length", 32), b.value("levels", 5), b.value("dim", 1));
  }
  config.y_cells = j.value("y_cells", config.y_cells);
  config.phantom_r = j.value("phantom_r", config.phantom_r);
  config.phantom_seed = j.value("phantom_seed", config.phantom_seed);
  config.n_grid = j.value("n_grid", config.n_grid);
  config.channel_grid = j.value("channel_grid", config.channel_grid);
  config.channels = j.value("channels", config.channels);
  config.sigma = j.value("sigma", config.sigma);
  config.alpha = j.value("alpha", config.alpha);
  config.order = j.value("order", config.order);
  config.smoothness_r = j.value("smoothness_r", config.smoothness_r);
  config.table_r_max = j.value("table_r_max", config.table_r_max);
  if (j.contains("scheme"))
    config.scheme = sampling_scheme_from_string(j["scheme"].get<std::string>());
  if (j.contains("mu")) config.mu = mu_policy_from_json(j["mu"].dump());
  config.trials = j.value("trials", config.trials);
  config.seed = j.value("seed", config.seed);
  return config;
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string study_csv(const StudyResult& result, const StudyConfig& config) {
  char header[160];
  std::snprintf(header, sizeof header,
                "# {\"artifact\":\"svirkit\",\"version\":\"%s\",\"config_hash\":\"%016llx\"}\n",
                kArtifactVersion,
                static_cast<unsigned long long>(fnv1a_hash(study_config_to_json(config))));
  std::string out = header;
  out += "n,N,mu,alpha,error_mean,error_std,seed\n";
  for (const StudyRow& row : result.rows) {
    out += std::to_string(row.n);
    out += ',';
    out += std::to_string(row.channels);
    out += ',';
    out += format_double(row.mu);
    out += ',';
    out += format_double(row.alpha);
    out += ',';
    out += format_double(row.error_mean);
    out += ',';
    out += format_double(row.error_std);
    out += ',';
    out += std::to_string(row.seed);
    out += '\n';
  }
  char slope[120];
  std::snprintf(slope, sizeof slope, "# slope %s half_width %s\n",
                format_double(result.slope.slope).c_str(),
                format_double(result.slope.half_width).c_str());
  out += slope;
  return out;
}

void write_study_csv(const StudyResult& result, const StudyConfig& config,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write study results to " + path);
  out << study_csv(result, config);
}

EstimateRunReport run_estimate(const EstimateRunConfig& config) {
  const PsfDataset dataset = load_dataset(config.dataset_path);
  KernelTableCache cache;
  FitOptions options = config.options;
  options.mu =
      resolve_mu(config.mu, dataset, options, dataset.noise_sigma, config.seed, &cache);

  const auto start = std::chrono::steady_clock::now();
  const IrcEstimate estimate = fit(dataset, options, &cache);
  const auto stop = std::chrono::steady_clock::now();
  if (!config.estimate_path.empty()) save_estimate(estimate, config.estimate_path);

  EstimateRunReport report;
  report.count = dataset.count();
  report.channels = dataset.channels();
  report.mu = options.mu;
  report.factorization_count = estimate.factorization_count;
  report.geometry =
      quasi_uniformity_report(dataset.locations, BoxDomain::unit(dataset.locations.dim()));
  report.elapsed_seconds = std::chrono::duration<double>(stop - start).count();
  return report;
}

} // namespace svirkit
