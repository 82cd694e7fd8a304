#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

namespace svirkit {

// Axis-aligned box, the sampling domain for impulse-response locations.
struct BoxDomain {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  BoxDomain() = default;
  BoxDomain(Eigen::VectorXd lo, Eigen::VectorXd hi);
  static BoxDomain unit(int dim);

  int dim() const { return static_cast<int>(lower.size()); }
  double side(int axis) const { return upper[axis] - lower[axis]; }
  double min_side() const;
  double diameter() const { return (upper - lower).norm(); }
  bool contains(const Eigen::VectorXd& p, double tol = 0.0) const;
};

// Finite set of pairwise-distinct locations in R^d, stored one per row.
struct LocationSet {
  Eigen::MatrixXd points;

  LocationSet() = default;
  explicit LocationSet(Eigen::MatrixXd pts);

  int count() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
  Eigen::VectorXd point(int i) const { return points.row(i).transpose(); }
};

enum class SamplingScheme { MidpointGrid, JitteredGrid, UniformRandom, Halton };

SamplingScheme sampling_scheme_from_string(const std::string& name);
std::string to_string(SamplingScheme scheme);

struct GeometryReport {
  double fill = 0.0;
  double separation = 0.0;
  double ratio = 0.0;
  // Probe spacing used for the fill estimate; 0 when the value is exact (d = 1).
  double probe_resolution = 0.0;
};

// Draws n locations in box.  MidpointGrid and JitteredGrid require n to be a
// d-th power; JitteredGrid perturbs each midpoint by at most a quarter cell
// per coordinate, which keeps the fill/separation ratio bounded by 3 in 1D.
// Halton ignores the seed (the sequence is deterministic by construction).
LocationSet generate_locations(int n, const BoxDomain& box, SamplingScheme scheme,
                               std::uint64_t seed);

// Half the smallest pairwise distance.  Exact; switches from the O(n^2) scan
// to a uniform cell index above 4096 points.
double separation_distance(const LocationSet& locations);

// Fill distance sup_{y in box} min_i |y - y_i|.  Exact in 1D.  In higher
// dimension it is evaluated on a probe grid (box corners included) of spacing
// at most probe_resolution; pass 0 to get the default min_side/512.
// The grid estimate is a lower bound on the true fill distance, accurate to
// about one probe spacing.
double fill_distance(const LocationSet& locations, const BoxDomain& box,
                     double probe_resolution = 0.0);

GeometryReport quasi_uniformity_report(const LocationSet& locations, const BoxDomain& box,
                                       double probe_resolution = 0.0);

// {"dim": d, "points": [[...], ...]}, coordinates printed so that the
// round trip is exact to within 1e-15 relative.
std::string location_set_to_json(const LocationSet& locations);
LocationSet location_set_from_json(const std::string& text);

} // namespace svirkit
