#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace svirkit {

enum class BasisKind { Canonical, Haar, Daubechies4 };

BasisKind basis_kind_from_string(const std::string& name);
std::string to_string(BasisKind kind);

// Discrete orthonormal basis of a 1D signal of length N, or of an N x N image
// (dim = 2, tensor products, row-major flattening).  Wavelet kinds require N
// to be a power of two and apply `levels` periodized decomposition steps.
struct BasisSpec {
  BasisKind kind = BasisKind::Canonical;
  int signal_length = 0;
  int levels = 0;
  int dim = 1;

  BasisSpec() = default;
  BasisSpec(BasisKind k, int n, int j, int d = 1);

  int channels() const;
  bool operator==(const BasisSpec& other) const = default;
};

// Coefficients in coarse-to-fine channel order: scaling block first, then
// detail subbands from coarsest to finest (for dim = 2, ordered by the larger
// of the two per-axis scales).  Canonical coefficients keep signal order.
struct CoefficientVector {
  BasisSpec basis;
  Eigen::VectorXd values;
};

CoefficientVector analyze(const Eigen::VectorXd& signal, const BasisSpec& spec);
Eigen::VectorXd synthesize(const CoefficientVector& coeffs);

// Keeps the first n_keep channels, zeroing the rest.
CoefficientVector truncate(const CoefficientVector& coeffs, int n_keep);

struct WeightGroup {
  double value = 0.0;
  std::vector<int> channels;
};

// Channel weights for the smoothing penalty.  Wavelet kinds assign 1 to the
// scaling block and 2^(2 r j) to the detail subband of scale j (finest scale
// is j = levels), so the weights are constant on each subband.  The canonical
// kind falls back to (1 + k^2)^(r/d) per channel.
struct WeightSequence {
  BasisSpec basis;
  double smoothness_r = 0.0;
  Eigen::VectorXd weights;
  std::vector<WeightGroup> groups;
  // Largest c with weights[k] >= c * (1 + k^2)^(r/d) over all channels.
  double lower_bound_constant = 0.0;
};

WeightSequence subband_weights(const BasisSpec& spec, double smoothness_r);

// Restriction to the first `keep` channels (groups and the lower bound are
// recomputed over the kept range).
WeightSequence truncate_weights(const WeightSequence& weights, int keep);

} // namespace svirkit
