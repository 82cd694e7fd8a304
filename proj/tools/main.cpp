#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "svirkit/deblur.hpp"
#include "svirkit/errors.hpp"
#include "svirkit/estimator.hpp"
#include "svirkit/image_io.hpp"
#include "svirkit/kernel.hpp"
#include "svirkit/study.hpp"
#include "svirkit/synthdata.hpp"

namespace {

using svirkit::ValidationError;

constexpr const char* kVersion = "0.1.0";

struct CommonArgs {
  std::string config_path;
  std::optional<unsigned long> seed;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("config", args.config_path, "JSON config file")->required();
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--out", args.out, "override the config output path");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

nlohmann::json parse_config(const std::string& path) {
  try {
    return nlohmann::json::parse(slurp(path));
  } catch (const nlohmann::json::parse_error& err) {
    throw ValidationError(path + " is not valid JSON: " + err.what());
  }
}

nlohmann::json result_header(const std::string& config_text) {
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(svirkit::fnv1a_hash(config_text)));
  return {{"artifact", "svirkit"}, {"version", kVersion}, {"config_hash", hash}};
}

void emit(const nlohmann::json& payload, const std::optional<std::string>& out) {
  const std::string text = payload.dump(2) + "\n";
  if (out && !out->empty()) {
    std::ofstream file(*out, std::ios::binary);
    if (!file) throw ValidationError("cannot write result file " + *out);
    file << text;
  }
  std::cout << text;
}

svirkit::StudyConfig load_study_config(const CommonArgs& args) {
  svirkit::StudyConfig config = svirkit::study_config_from_json(slurp(args.config_path));
  if (args.seed) config.seed = *args.seed;
  return config;
}

std::string study_out_path(const CommonArgs& args, const nlohmann::json& config_json,
                           const char* fallback) {
  if (args.out && !args.out->empty()) return *args.out;
  return config_json.value("out", fallback);
}

int run_study(const CommonArgs& args, bool convergence) {
  const nlohmann::json raw = parse_config(args.config_path);
  svirkit::StudyConfig config = load_study_config(args);
  const svirkit::StudyResult result = convergence ? svirkit::run_convergence_study(config)
                                                  : svirkit::run_discretization_study(config);
  const std::string out =
      study_out_path(args, raw, convergence ? "convergence.csv" : "discretization.csv");
  svirkit::write_study_csv(result, config, out);
  nlohmann::json summary;
  summary["header"] = result_header(svirkit::study_config_to_json(config));
  summary["rows"] = result.rows.size();
  summary["slope"] = result.slope.slope;
  summary["slope_half_width"] = result.slope.half_width;
  summary["csv"] = out;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_estimate_cmd(const CommonArgs& args) {
  const nlohmann::json raw = parse_config(args.config_path);
  svirkit::EstimateRunConfig config;
  config.dataset_path = raw.value("dataset", "");
  if (config.dataset_path.empty()) throw ValidationError("estimate config needs a dataset path");
  config.estimate_path = raw.value("estimate_out", "estimate.json");
  if (args.out && !args.out->empty()) config.estimate_path = *args.out;
  config.options.alpha = raw.value("alpha", config.options.alpha);
  config.options.order = raw.value("order", config.options.order);
  config.options.smoothness_r = raw.value("smoothness_r", config.options.smoothness_r);
  config.options.table_r_max = raw.value("table_r_max", config.options.table_r_max);
  config.options.table_nodes = raw.value("table_nodes", config.options.table_nodes);
  config.options.quad_tol = raw.value("quad_tol", config.options.quad_tol);
  if (raw.contains("mu")) config.mu = svirkit::mu_policy_from_json(raw["mu"].dump());
  config.seed = raw.value("seed", 0UL);
  if (args.seed) config.seed = *args.seed;

  const svirkit::EstimateRunReport report = svirkit::run_estimate(config);
  nlohmann::json payload;
  payload["header"] = result_header(raw.dump());
  payload["count"] = report.count;
  payload["channels"] = report.channels;
  payload["mu"] = report.mu;
  payload["factorization_count"] = report.factorization_count;
  payload["geometry"] = {{"fill", report.geometry.fill},
                         {"separation", report.geometry.separation},
                         {"ratio", report.geometry.ratio}};
  payload["elapsed_seconds"] = report.elapsed_seconds;
  payload["estimate"] = config.estimate_path;
  std::cout << payload.dump(2) << "\n";
  return 0;
}

int run_deblur_cmd(const CommonArgs& args) {
  const nlohmann::json raw = parse_config(args.config_path);
  svirkit::DeblurDemoConfig config;
  config.image_size = raw.value("image_size", config.image_size);
  config.patch = raw.value("patch", config.patch);
  config.psf_grid = raw.value("psf_grid", config.psf_grid);
  config.psf_noise = raw.value("psf_noise", config.psf_noise);
  config.image_noise = raw.value("image_noise", config.image_noise);
  config.mu = raw.value("mu", config.mu);
  config.lambda_tv = raw.value("lambda_tv", config.lambda_tv);
  config.iterations = raw.value("iterations", config.iterations);
  config.seed = raw.value("seed", config.seed);
  config.out_prefix = raw.value("out_prefix", std::string("deblur"));
  if (args.seed) config.seed = *args.seed;
  if (args.out) config.out_prefix = *args.out;

  const svirkit::DeblurDemoReport report = svirkit::run_deblur_demo(config);
  nlohmann::json payload;
  payload["header"] = result_header(raw.dump());
  payload["psnr_degraded"] = report.psnr_degraded;
  payload["psnr_restored"] = report.psnr_restored;
  payload["gain_db"] = report.psnr_restored - report.psnr_degraded;
  payload["images"] = config.out_prefix;
  std::cout << payload.dump(2) << "\n";
  return 0;
}

int run_geometry_cmd(const CommonArgs& args) {
  const nlohmann::json raw = parse_config(args.config_path);
  const int n = raw.value("n", 64);
  const int dim = raw.value("dim", 1);
  const svirkit::SamplingScheme scheme =
      svirkit::sampling_scheme_from_string(raw.value("scheme", "halton"));
  unsigned long seed = raw.value("seed", 0UL);
  if (args.seed) seed = *args.seed;

  const svirkit::LocationSet locations =
      svirkit::generate_locations(n, svirkit::BoxDomain::unit(dim), scheme, seed);
  const svirkit::GeometryReport report =
      svirkit::quasi_uniformity_report(locations, svirkit::BoxDomain::unit(dim));
  nlohmann::json payload;
  payload["header"] = result_header(raw.dump());
  payload["n"] = n;
  payload["dim"] = dim;
  payload["scheme"] = svirkit::to_string(scheme);
  payload["fill"] = report.fill;
  payload["separation"] = report.separation;
  payload["ratio"] = report.ratio;
  payload["locations"] = nlohmann::json::parse(svirkit::location_set_to_json(locations));
  emit(payload, args.out);
  return 0;
}

int run_kernel_table_cmd(const CommonArgs& args) {
  const nlohmann::json raw = parse_config(args.config_path);
  const svirkit::RadialKernelSpec spec(raw.value("dim", 1), raw.value("order", 1),
                                       raw.value("alpha", 0.5), raw.value("weight", 1.0));
  const double r_max = raw.value("r_max", 2.5);
  const int nodes = raw.value("nodes", 2048);
  const double quad_tol = raw.value("quad_tol", 1e-9);
  const svirkit::KernelTable table = svirkit::build_table(spec, r_max, nodes, quad_tol);

  std::string out = raw.value("out", std::string("kernel.blob"));
  if (args.out && !args.out->empty()) out = *args.out;
  std::ofstream blob(out, std::ios::binary);
  if (!blob) throw ValidationError("cannot write kernel table to " + out);
  svirkit::write_kernel_blob(blob, table);

  nlohmann::json payload;
  payload["header"] = result_header(raw.dump());
  payload["rho_zero"] = table.rho_zero;
  payload["r_max"] = table.r_max;
  payload["nodes"] = table.radii.size();
  payload["tail_cutoff"] = table.tail_cutoff;
  payload["blob"] = out;
  std::cout << payload.dump(2) << "\n";
  return 0;
}

int run_synth_cmd(const CommonArgs& args) {
  const nlohmann::json raw = parse_config(args.config_path);
  svirkit::StudyConfig shape = svirkit::study_config_from_json(slurp(args.config_path));
  if (args.seed) shape.seed = *args.seed;
  const int n = raw.value("n", 32);
  const int dim = shape.basis.dim;

  const svirkit::TensorGrid x_grid =
      svirkit::TensorGrid::unit_midpoints(shape.basis.signal_length, dim);
  const svirkit::TensorGrid y_grid = svirkit::TensorGrid::unit_midpoints(shape.y_cells, dim);
  const svirkit::LocationSet locations =
      svirkit::generate_locations(n, svirkit::BoxDomain::unit(dim), shape.scheme, shape.seed);

  svirkit::PsfDataset dataset;
  if (shape.phantom == "prescribed") {
    const svirkit::PrescribedPhantom phantom = svirkit::prescribed_smoothness_svir(
        shape.phantom_r, shape.order, shape.phantom_seed, x_grid, y_grid, shape.basis);
    dataset = svirkit::sample_prescribed_psfs(phantom, locations, shape.channels, shape.sigma,
                                              shape.seed);
  } else if (shape.phantom == "gaussian-narrow" || shape.phantom == "gaussian-wide") {
    const svirkit::GaussianVariant variant = shape.phantom == "gaussian-narrow"
                                                 ? svirkit::GaussianVariant::Narrow
                                                 : svirkit::GaussianVariant::Wide;
    svirkit::ColumnModel model;
    if (dim == 1)
      model = [variant, x_grid](const Eigen::RowVectorXd& y) {
        return svirkit::gaussian_column_1d(variant, x_grid, y[0]);
      };
    else
      model = [x_grid](const Eigen::RowVectorXd& y) {
        return svirkit::gaussian_column_2d(x_grid, y);
      };
    dataset = svirkit::sample_psfs_exact(model, locations, shape.basis, shape.channels,
                                         shape.sigma, shape.seed);
  } else {
    throw ValidationError("unknown phantom family " + shape.phantom);
  }

  std::string out = raw.value("out", std::string("dataset.json"));
  if (args.out && !args.out->empty()) out = *args.out;
  svirkit::save_dataset(dataset, out);

  nlohmann::json payload;
  payload["header"] = result_header(svirkit::study_config_to_json(shape));
  payload["count"] = dataset.count();
  payload["channels"] = dataset.channels();
  payload["sigma"] = dataset.noise_sigma;
  payload["dataset"] = out;
  std::cout << payload.dump(2) << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatially varying impulse response estimation harness"};
  app.require_subcommand(1);

  CommonArgs estimate_args, convergence_args, discretization_args, deblur_args, geometry_args,
      kernel_args, synth_args;
  add_common(app.add_subcommand("estimate", "fit an estimate from a stored dataset"),
             estimate_args);
  add_common(app.add_subcommand("convergence", "sample-count convergence study"),
             convergence_args);
  add_common(app.add_subcommand("discretization", "channel-count discretization study"),
             discretization_args);
  add_common(app.add_subcommand("deblur", "spatially varying deblurring demonstration"),
             deblur_args);
  add_common(app.add_subcommand("geometry", "sampling geometry diagnostics"), geometry_args);
  add_common(app.add_subcommand("kernel-table", "tabulate a smoothing kernel"), kernel_args);
  add_common(app.add_subcommand("synth", "draw and store a synthetic dataset"), synth_args);

  try {
    app.parse(argc, argv);
    if (app.got_subcommand("estimate")) return run_estimate_cmd(estimate_args);
    if (app.got_subcommand("convergence")) return run_study(convergence_args, true);
    if (app.got_subcommand("discretization")) return run_study(discretization_args, false);
    if (app.got_subcommand("deblur")) return run_deblur_cmd(deblur_args);
    if (app.got_subcommand("geometry")) return run_geometry_cmd(geometry_args);
    if (app.got_subcommand("kernel-table")) return run_kernel_table_cmd(kernel_args);
    if (app.got_subcommand("synth")) return run_synth_cmd(synth_args);
    return 2;
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  } catch (const svirkit::ValidationError& err) {
    std::cerr << "validation error: " << err.what() << "\n";
    return 2;
  } catch (const svirkit::NumericalError& err) {
    std::cerr << "numerical error: " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  }
}
