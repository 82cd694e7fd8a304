#include "svirkit/basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "svirkit/errors.hpp"

namespace svirkit {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

int log2_exact(int n) {
  int m = 0;
  while ((1 << m) < n) ++m;
  return m;
}

std::vector<double> scaling_filter(BasisKind kind) {
  const double s2 = std::sqrt(2.0);
  switch (kind) {
    case BasisKind::Haar:
      return {1.0 / s2, 1.0 / s2};
    case BasisKind::Daubechies4: {
      const double s3 = std::sqrt(3.0);
      const double c = 4.0 * s2;
      return {(1.0 + s3) / c, (3.0 + s3) / c, (3.0 - s3) / c, (1.0 - s3) / c};
    }
    default:
      throw ValidationError("no wavelet filter for the canonical basis");
  }
}

std::vector<double> detail_filter(const std::vector<double>& h) {
  std::vector<double> g(h.size());
  for (size_t t = 0; t < h.size(); ++t)
    g[t] = ((t % 2) ? -1.0 : 1.0) * h[h.size() - 1 - t];
  return g;
}

// One periodized decomposition step on the leading `len` entries of `a`:
// approx into a[0, len/2), detail into a[len/2, len).
void step_forward(Eigen::VectorXd& a, int len, const std::vector<double>& h,
                  const std::vector<double>& g) {
  const int half = len / 2;
  Eigen::VectorXd out(len);
  for (int i = 0; i < half; ++i) {
    double lo = 0.0, hi = 0.0;
    for (size_t t = 0; t < h.size(); ++t) {
      const double v = a[(2 * i + t) % len];
      lo += h[t] * v;
      hi += g[t] * v;
    }
    out[i] = lo;
    out[half + i] = hi;
  }
  a.head(len) = out;
}

void step_inverse(Eigen::VectorXd& a, int len, const std::vector<double>& h,
                  const std::vector<double>& g) {
  const int half = len / 2;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(len);
  for (int i = 0; i < half; ++i) {
    const double lo = a[i];
    const double hi = a[half + i];
    for (size_t t = 0; t < h.size(); ++t)
      out[(2 * i + t) % len] += h[t] * lo + g[t] * hi;
  }
  a.head(len) = out;
}

// Full 1D transform into [approx | detail level J | ... | detail level 1],
// i.e. coarse-to-fine layout directly.
Eigen::VectorXd forward_1d(const Eigen::VectorXd& signal, BasisKind kind, int levels) {
  const auto h = scaling_filter(kind);
  const auto g = detail_filter(h);
  Eigen::VectorXd a = signal;
  const int n = static_cast<int>(signal.size());
  int len = n;
  for (int l = 0; l < levels; ++l) {
    step_forward(a, len, h, g);
    len /= 2;
  }
  return a;
}

Eigen::VectorXd inverse_1d(const Eigen::VectorXd& coeffs, BasisKind kind, int levels) {
  const auto h = scaling_filter(kind);
  const auto g = detail_filter(h);
  Eigen::VectorXd a = coeffs;
  const int n = static_cast<int>(coeffs.size());
  int len = n >> (levels - 1);
  for (int l = 0; l < levels; ++l) {
    step_inverse(a, len, h, g);
    len *= 2;
  }
  return a;
}

// Scale of a 1D channel index in the coarse-to-fine layout: 0 for the
// scaling block, 1 (coarsest detail) .. levels (finest detail) otherwise.
int scale_of_index(int k, int n, int levels) {
  const int base = n >> levels;
  if (k < base) return 0;
  int j = 1;
  int block = base;
  int start = base;
  while (true) {
    if (k < start + block) return j;
    start += block;
    block *= 2;
    ++j;
  }
}

// For dim = 2 the separable transform matrix is flattened into the
// coarse-to-fine channel order sorted by (max scale, row scale, column
// scale, position).  Returns coefficient-order -> matrix-flat-index.
std::vector<int> tensor_channel_order(const BasisSpec& spec) {
  const int n = spec.signal_length;
  std::vector<int> order(static_cast<size_t>(n) * n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> scale(n);
  for (int k = 0; k < n; ++k) scale[k] = scale_of_index(k, n, spec.levels);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const int ar = a / n, ac = a % n, br = b / n, bc = b % n;
    const int amax = std::max(scale[ar], scale[ac]);
    const int bmax = std::max(scale[br], scale[bc]);
    if (amax != bmax) return amax < bmax;
    if (scale[ar] != scale[br]) return scale[ar] < scale[br];
    if (scale[ac] != scale[bc]) return scale[ac] < scale[bc];
    return a < b;
  });
  return order;
}

} // namespace

BasisKind basis_kind_from_string(const std::string& name) {
  if (name == "canonical") return BasisKind::Canonical;
  if (name == "haar") return BasisKind::Haar;
  if (name == "daubechies4" || name == "db4") return BasisKind::Daubechies4;
  throw ValidationError("unknown basis kind: " + name);
}

std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::Canonical: return "canonical";
    case BasisKind::Haar: return "haar";
    case BasisKind::Daubechies4: return "daubechies4";
  }
  throw ValidationError("invalid basis kind value");
}

BasisSpec::BasisSpec(BasisKind k, int n, int j, int d) : kind(k), signal_length(n), levels(j), dim(d) {
  if (n < 1) throw ValidationError("basis signal length must be positive");
  if (d != 1 && d != 2) throw ValidationError("basis dimension must be 1 or 2");
  if (kind == BasisKind::Canonical) {
    levels = 0;
    return;
  }
  if (!is_power_of_two(n))
    throw ValidationError("wavelet bases need a power-of-two signal length");
  const int m = log2_exact(n);
  if (j < 1 || j > m) {
    std::ostringstream msg;
    msg << "wavelet levels must satisfy 1 <= J <= log2(N) = " << m << ", got " << j;
    throw ValidationError(msg.str());
  }
}

int BasisSpec::channels() const {
  return dim == 1 ? signal_length : signal_length * signal_length;
}

CoefficientVector analyze(const Eigen::VectorXd& signal, const BasisSpec& spec) {
  if (signal.size() != spec.channels())
    throw ValidationError("signal length does not match the basis spec");
  CoefficientVector out{spec, {}};
  if (spec.kind == BasisKind::Canonical) {
    out.values = signal;
    return out;
  }
  const int n = spec.signal_length;
  if (spec.dim == 1) {
    out.values = forward_1d(signal, spec.kind, spec.levels);
    return out;
  }
  Eigen::MatrixXd img = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                       Eigen::RowMajor>>(signal.data(), n, n);
  Eigen::MatrixXd tmp(n, n);
  for (int r = 0; r < n; ++r)
    tmp.row(r) = forward_1d(img.row(r).transpose(), spec.kind, spec.levels).transpose();
  for (int c = 0; c < n; ++c)
    tmp.col(c) = forward_1d(tmp.col(c), spec.kind, spec.levels);
  const auto order = tensor_channel_order(spec);
  out.values.resize(spec.channels());
  for (int k = 0; k < spec.channels(); ++k) {
    const int flat = order[k];
    out.values[k] = tmp(flat / n, flat % n);
  }
  return out;
}

Eigen::VectorXd synthesize(const CoefficientVector& coeffs) {
  const BasisSpec& spec = coeffs.basis;
  if (coeffs.values.size() != spec.channels())
    throw ValidationError("coefficient vector does not match its basis spec");
  if (spec.kind == BasisKind::Canonical) return coeffs.values;
  const int n = spec.signal_length;
  if (spec.dim == 1) return inverse_1d(coeffs.values, spec.kind, spec.levels);

  const auto order = tensor_channel_order(spec);
  Eigen::MatrixXd tmp(n, n);
  for (int k = 0; k < spec.channels(); ++k) {
    const int flat = order[k];
    tmp(flat / n, flat % n) = coeffs.values[k];
  }
  for (int c = 0; c < n; ++c)
    tmp.col(c) = inverse_1d(tmp.col(c), spec.kind, spec.levels);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> img(n, n);
  for (int r = 0; r < n; ++r)
    img.row(r) = inverse_1d(tmp.row(r).transpose(), spec.kind, spec.levels).transpose();
  return Eigen::Map<const Eigen::VectorXd>(img.data(), spec.channels());
}

CoefficientVector truncate(const CoefficientVector& coeffs, int n_keep) {
  if (n_keep < 1 || n_keep > coeffs.values.size())
    throw ValidationError("truncation size out of range");
  CoefficientVector out = coeffs;
  out.values.tail(out.values.size() - n_keep).setZero();
  return out;
}

WeightSequence subband_weights(const BasisSpec& spec, double smoothness_r) {
  if (!(smoothness_r > 0.5 * spec.dim))
    throw ValidationError("weight smoothness must exceed dim/2");
  WeightSequence seq;
  seq.basis = spec;
  seq.smoothness_r = smoothness_r;
  const int total = spec.channels();
  seq.weights.resize(total);

  if (spec.kind == BasisKind::Canonical) {
    for (int k = 0; k < total; ++k)
      seq.weights[k] = std::pow(1.0 + static_cast<double>(k) * k, smoothness_r / spec.dim);
  } else if (spec.dim == 1) {
    for (int k = 0; k < total; ++k) {
      const int j = scale_of_index(k, spec.signal_length, spec.levels);
      seq.weights[k] = j == 0 ? 1.0 : std::pow(2.0, 2.0 * smoothness_r * j);
    }
  } else {
    const int n = spec.signal_length;
    const auto order = tensor_channel_order(spec);
    std::vector<int> scale(n);
    for (int k = 0; k < n; ++k) scale[k] = scale_of_index(k, n, spec.levels);
    for (int k = 0; k < total; ++k) {
      const int flat = order[k];
      const int j = std::max(scale[flat / n], scale[flat % n]);
      seq.weights[k] = j == 0 ? 1.0 : std::pow(2.0, 2.0 * smoothness_r * j);
    }
  }

  // Group channels sharing a weight, ordered by ascending weight value.
  std::vector<int> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return seq.weights[a] < seq.weights[b]; });
  for (int i = 0; i < total; ++i) {
    const double w = seq.weights[idx[i]];
    if (seq.groups.empty() || seq.groups.back().value != w)
      seq.groups.push_back({w, {}});
    seq.groups.back().channels.push_back(idx[i]);
  }

  double c = std::numeric_limits<double>::infinity();
  for (int k = 0; k < total; ++k) {
    const double bound = std::pow(1.0 + static_cast<double>(k) * k, smoothness_r / spec.dim);
    c = std::min(c, seq.weights[k] / bound);
  }
  seq.lower_bound_constant = c;
  return seq;
}

WeightSequence truncate_weights(const WeightSequence& weights, int keep) {
  const int total = static_cast<int>(weights.weights.size());
  if (keep < 1 || keep > total)
    throw ValidationError("truncate_weights: keep count must be in [1, channels]");
  WeightSequence seq;
  seq.basis = weights.basis;
  seq.smoothness_r = weights.smoothness_r;
  seq.weights = weights.weights.head(keep);

  std::vector<int> idx(keep);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return seq.weights[a] < seq.weights[b]; });
  for (int i = 0; i < keep; ++i) {
    const double w = seq.weights[idx[i]];
    if (seq.groups.empty() || seq.groups.back().value != w)
      seq.groups.push_back({w, {}});
    seq.groups.back().channels.push_back(idx[i]);
  }

  double c = std::numeric_limits<double>::infinity();
  for (int k = 0; k < keep; ++k) {
    const double bound =
        std::pow(1.0 + static_cast<double>(k) * k, seq.smoothness_r / seq.basis.dim);
    c = std::min(c, seq.weights[k] / bound);
  }
  seq.lower_bound_constant = c;
  return seq;
}

} // namespace svirkit
