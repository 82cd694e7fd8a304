#include "svirkit/synthdata.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "little_endian.hpp"
#include "svirkit/errors.hpp"

namespace svirkit {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_x_grid(const TensorGrid& x_grid, const BasisSpec& basis) {
  if (x_grid.dim() != basis.dim)
    throw ValidationError("x-grid dimension does not match the basis");
  for (int s : x_grid.shape)
    if (s != basis.signal_length)
      throw ValidationError("x-grid must have basis signal_length nodes per axis");
}

// Multilinear interpolation weights of y inside the y-grid, clamped to the
// boundary cells.  Throws if y leaves the grid's cell hull.
struct InterpStencil {
  long base[2] = {0, 0};
  double frac[2] = {0.0, 0.0};
};

InterpStencil interp_stencil(const TensorGrid& grid, const Eigen::RowVectorXd& y) {
  InterpStencil st;
  for (int a = 0; a < grid.dim(); ++a) {
    const double lo = grid.origin[a] - 0.5 * grid.spacing[a];
    const double hi = grid.origin[a] + (grid.shape[a] - 0.5) * grid.spacing[a];
    if (y[a] < lo - 1e-12 || y[a] > hi + 1e-12)
      throw ValidationError("sample location outside the phantom's domain");
    double t = (y[a] - grid.origin[a]) / grid.spacing[a];
    t = std::min(std::max(t, 0.0), static_cast<double>(grid.shape[a] - 1));
    long j = static_cast<long>(std::floor(t));
    if (j >= grid.shape[a] - 1) j = grid.shape[a] - 2;
    if (grid.shape[a] == 1) {
      st.base[a] = 0;
      st.frac[a] = 0.0;
    } else {
      st.base[a] = j;
      st.frac[a] = t - static_cast<double>(j);
    }
  }
  return st;
}

Eigen::VectorXd interpolate_column(const SvirGrid& phantom, const Eigen::RowVectorXd& y) {
  const TensorGrid& g = phantom.y_grid;
  const InterpStencil st = interp_stencil(g, y);
  if (g.dim() == 1) {
    const double f = st.frac[0];
    return (1.0 - f) * phantom.values.col(st.base[0]) + f * phantom.values.col(st.base[0] + 1);
  }
  const long n1 = g.shape[1];
  const double f0 = st.frac[0], f1 = st.frac[1];
  const long c00 = st.base[0] * n1 + st.base[1];
  Eigen::VectorXd out = (1.0 - f0) * (1.0 - f1) * phantom.values.col(c00);
  if (g.shape[1] > 1) out += (1.0 - f0) * f1 * phantom.values.col(c00 + 1);
  if (g.shape[0] > 1) out += f0 * (1.0 - f1) * phantom.values.col(c00 + n1);
  if (g.shape[0] > 1 && g.shape[1] > 1) out += f0 * f1 * phantom.values.col(c00 + n1 + 1);
  return out;
}

void add_noise(Eigen::MatrixXd& observations, double sigma, unsigned long seed) {
  if (sigma < 0.0) throw ValidationError("noise level must be nonnegative");
  if (sigma == 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (long i = 0; i < observations.rows(); ++i)
    for (long k = 0; k < observations.cols(); ++k) observations(i, k) += gauss(rng);
}

void check_channels(const BasisSpec& basis, int channels) {
  if (channels < 1 || channels > basis.channels())
    throw ValidationError("channel count must be in [1, basis channels]");
}

} // namespace

GaussianVariant gaussian_variant_from_string(const std::string& name) {
  if (name == "narrow") return GaussianVariant::Narrow;
  if (name == "wide") return GaussianVariant::Wide;
  throw ValidationError("unknown Gaussian variant '" + name + "' (use narrow or wide)");
}

std::string to_string(GaussianVariant variant) {
  return variant == GaussianVariant::Narrow ? "narrow" : "wide";
}

double gaussian_sigma_1d(GaussianVariant variant, double y) {
  if (variant == GaussianVariant::Narrow) return 0.05 * (1.0 + 2.0 * std::min(y, 1.0 - y));
  return 1.0 + 2.0 * std::max(1.0 - y, y);
}

double gaussian_sigma_2d(double y1) { return 1.0 + 2.0 * std::max(1.0 - y1, y1); }

Eigen::VectorXd gaussian_column_1d(GaussianVariant variant, const TensorGrid& x_grid, double y) {
  if (x_grid.dim() != 1) throw ValidationError("1D Gaussian family needs a 1D x-grid");
  const double sigma = gaussian_sigma_1d(variant, y);
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * kPi));
  Eigen::VectorXd out(x_grid.total());
  for (long i = 0; i < out.size(); ++i) {
    const double x = x_grid.node(i)[0];
    out[i] = norm * std::exp(-0.5 * x * x / (sigma * sigma));
  }
  return out;
}

Eigen::VectorXd gaussian_column_2d(const TensorGrid& x_grid, const Eigen::RowVectorXd& y) {
  if (x_grid.dim() != 2) throw ValidationError("2D Gaussian family needs a 2D x-grid");
  if (y.size() != 2) throw ValidationError("2D Gaussian family needs a 2D location");
  const double sigma = gaussian_sigma_2d(y[0]);
  const double norm = 1.0 / (2.0 * kPi * sigma * sigma);
  Eigen::VectorXd out(x_grid.total());
  for (long i = 0; i < out.size(); ++i) {
    const double r2 = x_grid.node(i).squaredNorm();
    out[i] = norm * std::exp(-0.5 * r2 / (sigma * sigma));
  }
  return out;
}

SvirGrid gaussian_svir_1d(GaussianVariant variant, const TensorGrid& x_grid,
                          const TensorGrid& y_grid) {
  SvirGrid out = make_svir_grid(x_grid, y_grid);
  for (long j = 0; j < y_grid.total(); ++j)
    out.values.col(j) = gaussian_column_1d(variant, x_grid, y_grid.node(j)[0]);
  return out;
}

SvirGrid gaussian_svir_2d(const TensorGrid& x_grid, const TensorGrid& y_grid) {
  SvirGrid out = make_svir_grid(x_grid, y_grid);
  for (long j = 0; j < y_grid.total(); ++j)
    out.values.col(j) = gaussian_column_2d(x_grid, y_grid.node(j));
  return out;
}

PrescribedPhantom prescribed_smoothness_svir(double r, double s, unsigned long seed,
                                             const TensorGrid& x_grid, const TensorGrid& y_grid,
                                             const BasisSpec& basis) {
  if (!(r > 0.0) || !(s > 0.0)) throw ValidationError("smoothness orders must be positive");
  check_x_grid(x_grid, basis);
  if (y_grid.dim() != basis.dim)
    throw ValidationError("y-grid dimension does not match the basis");

  PrescribedPhantom phantom;
  phantom.basis = basis;
  phantom.smoothness_r = r;
  phantom.smoothness_s = s;
  const int d = basis.dim;
  const int total = basis.channels();
  const double decay = -(2.0 * r + d) / (2.0 * d);
  phantom.amplitudes.resize(total);
  phantom.frequencies.resize(total, d);
  phantom.phases.resize(total, d);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 2.0 * kPi);
  for (int k = 0; k < total; ++k) {
    phantom.amplitudes[k] = std::pow(static_cast<double>(k + 1), decay);
    for (int a = 0; a < d; ++a) {
      phantom.frequencies(k, a) = 1 + (k + a) % 3;
      phantom.phases(k, a) = unif(rng);
    }
  }

  phantom.grid = make_svir_grid(x_grid, y_grid);
  for (long j = 0; j < y_grid.total(); ++j) {
    CoefficientVector coeffs{basis, prescribed_coefficients(phantom, y_grid.node(j), total)};
    phantom.grid.values.col(j) = synthesize(coeffs);
  }
  return phantom;
}

Eigen::VectorXd prescribed_coefficients(const PrescribedPhantom& phantom,
                                        const Eigen::RowVectorXd& y, int channels) {
  check_channels(phantom.basis, channels);
  if (y.size() != phantom.basis.dim)
    throw ValidationError("location dimension does not match the phantom");
  Eigen::VectorXd out(channels);
  for (int k = 0; k < channels; ++k) {
    double g = 1.0;
    for (int a = 0; a < phantom.basis.dim; ++a)
      g *= std::cos(2.0 * kPi * phantom.frequencies(k, a) * y[a] + phantom.phases(k, a));
    out[k] = phantom.amplitudes[k] * g;
  }
  return out;
}

double prescribed_truncation_tail(const PrescribedPhantom& phantom, int keep_channels) {
  const int total = phantom.basis.channels();
  if (keep_channels < 0 || keep_channels > total)
    throw ValidationError("keep count must be in [0, channels]");
  // Each product-cosine factor contributes a mean square of 1/2 over [0,1].
  const double mean_square = std::pow(0.5, phantom.basis.dim);
  double tail = 0.0;
  for (int k = total - 1; k >= keep_channels; --k)
    tail += phantom.amplitudes[k] * phantom.amplitudes[k] * mean_square;
  return std::sqrt(tail * phantom.grid.x_grid.cell_measure());
}

PsfDataset sample_psfs(const SvirGrid& phantom, const LocationSet& locations,
                       const BasisSpec& basis, int channels, double sigma, unsigned long seed) {
  check_x_grid(phantom.x_grid, basis);
  check_channels(basis, channels);
  if (locations.dim() != phantom.y_grid.dim())
    throw ValidationError("sample locations do not match the phantom's y dimension");
  PsfDataset out;
  out.locations = locations;
  out.basis = basis;
  out.noise_sigma = sigma;
  out.seed = seed;
  out.observations.resize(locations.count(), channels);
  for (int i = 0; i < locations.count(); ++i) {
    const Eigen::VectorXd column = interpolate_column(phantom, locations.point(i));
    out.observations.row(i) = analyze(column, basis).values.head(channels).transpose();
  }
  add_noise(out.observations, sigma, seed);
  return out;
}

PsfDataset sample_psfs_exact(const ColumnModel& model, const LocationSet& locations,
                             const BasisSpec& basis, int channels, double sigma,
                             unsigned long seed) {
  check_channels(basis, channels);
  PsfDataset out;
  out.locations = locations;
  out.basis = basis;
  out.noise_sigma = sigma;
  out.seed = seed;
  out.observations.resize(locations.count(), channels);
  for (int i = 0; i < locations.count(); ++i) {
    const Eigen::VectorXd column = model(locations.point(i));
    if (column.size() != static_cast<long>(basis.channels()))
      throw ValidationError("column model output length does not match the basis");
    out.observations.row(i) = analyze(column, basis).values.head(channels).transpose();
  }
  add_noise(out.observations, sigma, seed);
  return out;
}

PsfDataset sample_prescribed_psfs(const PrescribedPhantom& phantom, const LocationSet& locations,
                                  int channels, double sigma, unsigned long seed) {
  check_channels(phantom.basis, channels);
  if (locations.dim() != phantom.basis.dim)
    throw ValidationError("sample locations do not match the phantom's dimension");
  PsfDataset out;
  out.locations = locations;
  out.basis = phantom.basis;
  out.noise_sigma = sigma;
  out.seed = seed;
  out.observations.resize(locations.count(), channels);
  for (int i = 0; i < locations.count(); ++i)
    out.observations.row(i) = prescribed_coefficients(phantom, locations.point(i), channels);
  add_noise(out.observations, sigma, seed);
  return out;
}

void save_dataset(const PsfDataset& dataset, const std::string& manifest_path) {
  namespace fs = std::filesystem;
  fs::path manifest(manifest_path);
  fs::path blob = manifest;
  blob.replace_extension(".blob");

  nlohmann::json j;
  j["version"] = 1;
  j["kind"] = "psf-dataset";
  j["basis"] = {{"kind", to_string(dataset.basis.kind)},
                {"length", dataset.basis.signal_length},
                {"levels", dataset.basis.levels},
                {"dim", dataset.basis.dim}};
  j["channels"] = dataset.channels();
  j["count"] = dataset.count();
  j["noise_sigma"] = dataset.noise_sigma;
  j["seed"] = dataset.seed;
  j["locations"] = nlohmann::json::parse(location_set_to_json(dataset.locations));
  j["blob"] = blob.filename().string();

  std::string bytes;
  bytes.reserve(static_cast<std::size_t>(dataset.observations.size()) * 8);
  for (int i = 0; i < dataset.count(); ++i)
    for (int k = 0; k < dataset.channels(); ++k)
      detail::append_le(bytes, dataset.observations(i, k));

  std::ofstream mf(manifest, std::ios::binary);
  if (!mf) throw ValidationError("cannot write dataset manifest " + manifest_path);
  mf << j.dump(2) << "\n";
  std::ofstream bf(blob, std::ios::binary);
  if (!bf) throw ValidationError("cannot write dataset blob " + blob.string());
  bf.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

PsfDataset load_dataset(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream mf(manifest_path);
  if (!mf) throw ValidationError("cannot open dataset manifest " + manifest_path);
  nlohmann::json j;
  mf >> j;
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw ValidationError("unsupported dataset manifest version");
  if (j.value("kind", "") != "psf-dataset")
    throw ValidationError("manifest is not a psf-dataset");

  PsfDataset out;
  out.basis = BasisSpec(basis_kind_from_string(j["basis"]["kind"].get<std::string>()),
                        j["basis"]["length"].get<int>(), j["basis"]["levels"].get<int>(),
                        j["basis"]["dim"].get<int>());
  out.noise_sigma = j["noise_sigma"].get<double>();
  out.seed = j["seed"].get<unsigned long>();
  out.locations = location_set_from_json(j["locations"].dump());
  const int count = j["count"].get<int>();
  const int channels = j["channels"].get<int>();
  if (count != out.locations.count())
    throw ValidationError("dataset count does not match its location set");

  fs::path blob = fs::path(manifest_path).parent_path() / j["blob"].get<std::string>();
  std::ifstream bf(blob, std::ios::binary);
  if (!bf) throw ValidationError("cannot open dataset blob " + blob.string());
  out.observations.resize(count, channels);
  for (int i = 0; i < count; ++i)
    for (int k = 0; k < channels; ++k)
      out.observations(i, k) = detail::read_le(bf, "dataset blob");
  return out;
}

} // namespace svirkit
