#pragma once

#include <string>
#include <utility>
#include <vector>

#include "svirkit/estimator.hpp"
#include "svirkit/synthdata.hpp"

namespace svirkit {

// Least-squares slope of log y against log x with a normal-theory 95%
// confidence half width.  Needs at least two rows of positive values; the
// half width is zero when the fit is exact or there are no residual degrees
// of freedom.
struct SlopeFit {
  double slope = 0.0;
  double half_width = 0.0;
};

SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& rows);

// How each fit picks its penalty: a schedule constant, a fixed value, or
// k-fold cross-validation over a candidate grid.
struct MuPolicy {
  enum class Kind { Schedule, Fixed, CrossValidate };
  Kind kind = Kind::Schedule;
  double value = 1.0; // schedule constant or the fixed penalty
  std::vector<double> candidates;
  int folds = 5;
};

MuPolicy mu_policy_from_json(const std::string& text);

struct StudyConfig {
  std::string phantom = "prescribed"; // prescribed | gaussian-narrow | gaussian-wide
  BasisSpec basis;
  int y_cells = 64;                 // evaluation grid resolution along each y axis
  double phantom_r = 1.0;           // prescribed decay exponent
  unsigned long phantom_seed = 0;   // prescribed phase draw
  std::vector<int> n_grid;          // sample counts, strictly increasing
  std::vector<int> channel_grid;    // channel counts for discretization studies
  int channels = 16;                // channels kept in convergence studies
  double sigma = 0.0;               // observation noise standard deviation
  double alpha = 0.3;
  int order = 1;
  double smoothness_r = 1.0;
  double table_r_max = 0.0; // 0 picks the estimator default
  SamplingScheme scheme = SamplingScheme::Halton;
  MuPolicy mu;
  int trials = 1;
  unsigned long seed = 0;
};

struct StudyRow {
  int n = 0;
  int channels = 0;
  double mu = 0.0; // averaged over trials when the policy is data-driven
  double alpha = 0.0;
  double error_mean = 0.0; // mean squared Hilbert-Schmidt error
  double error_std = 0.0;  // sample standard deviation over trials
  unsigned long seed = 0;  // first trial seed for the row
};

struct StudyResult {
  std::vector<StudyRow> rows;
  SlopeFit slope;
};

// Squared Hilbert-Schmidt reconstruction errors against the phantom for each
// sample count in n_grid, fitting one estimate per trial with per-trial seed
// seed + trial index.  The slope is fitted on log(mean error) vs log(n).
StudyResult run_convergence_study(const StudyConfig& config);

// Noise-free errors against the channel grid at a fixed dense sample count
// (the last entry of n_grid).  The slope is fitted on log(mean error) vs
// log(channels).
StudyResult run_discretization_study(const StudyConfig& config);

// Canonical JSON form of a config; its FNV-1a hash keys every result file so
// outputs can be traced back to the exact configuration.
std::string study_config_to_json(const StudyConfig& config);
StudyConfig study_config_from_json(const std::string& text);
std::uint64_t fnv1a_hash(const std::string& text);

// CSV with a one-line JSON header comment carrying the artifact version and
// the config hash.  Fixed columns: n, N, mu, alpha, error_mean, error_std,
// seed.  Identical (config, result) pairs produce byte-identical files.
std::string study_csv(const StudyResult& result, const StudyConfig& config);
void write_study_csv(const StudyResult& result, const StudyConfig& config,
                     const std::string& path);

// One estimation run over a stored dataset: fit, save the estimate next to
// the report data, and summarize the geometry and solver work.
struct EstimateRunConfig {
  std::string dataset_path;
  std::string estimate_path;
  FitOptions options;
  MuPolicy mu;
  unsigned long seed = 0; // cross-validation fold shuffling
};

struct EstimateRunReport {
  int count = 0;
  int channels = 0;
  double mu = 0.0;
  int factorization_count = 0;
  GeometryReport geometry;
  double elapsed_seconds = 0.0;
};

EstimateRunReport run_estimate(const EstimateRunConfig& config);

} // namespace svirkit
