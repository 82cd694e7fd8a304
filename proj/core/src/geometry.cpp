#include "svirkit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "svirkit/errors.hpp"

namespace svirkit {

namespace {

constexpr double kDistinctTol = 1e-12;

// Uniform cell index over the bounding box of a point set, used for nearest
// neighbor queries and for the large-n separation path.
class CellIndex {
public:
  CellIndex(const Eigen::MatrixXd& pts, double cell_size)
      : pts_(pts), cell_(cell_size), dim_(static_cast<int>(pts.cols())) {
    origin_ = pts.colwise().minCoeff().transpose();
    for (int i = 0; i < pts.rows(); ++i) {
      cells_[key_of(pts.row(i).transpose())].push_back(i);
    }
  }

  double cell_size() const { return cell_; }

  // Distance from q to the closest indexed point, searched in expanding
  // rings of cells.  Correct because a ring at offset k contains every point
  // closer than (k-1)*cell once the previous rings were inspected.
  double nearest_distance(const Eigen::VectorXd& q) const {
    std::vector<long long> center = coords_of(q);
    double best = std::numeric_limits<double>::infinity();
    for (int ring = 0;; ++ring) {
      bool any_cell = scan_ring(q, center, ring, best);
      if (std::isfinite(best) && best <= (ring - 1) * cell_) return best;
      if (!any_cell && ring > 0 && std::isfinite(best)) return best;
      if (ring > 4 && !std::isfinite(best) && !any_cell) {
        // Outside the indexed area entirely; fall back to a direct scan.
        for (int i = 0; i < pts_.rows(); ++i)
          best = std::min(best, (pts_.row(i).transpose() - q).norm());
        return best;
      }
    }
  }

  // Smallest pairwise distance among indexed points, assuming at least one
  // pair is within cell_ of each other (the caller grows cell_ otherwise).
  double min_pairwise(bool& found) const {
    double best = std::numeric_limits<double>::infinity();
    std::vector<long long> nb(dim_);
    // Half-space of neighbor offsets so each cell pair is visited once.
    std::vector<std::vector<long long>> offsets;
    gather_offsets(offsets, {}, true);
    for (const auto& [key, members] : cells_) {
      std::vector<long long> base = decode(key);
      for (const auto& off : offsets) {
        for (int a = 0; a < dim_; ++a) nb[a] = base[a] + off[a];
        auto it = cells_.find(encode(nb));
        if (it == cells_.end()) continue;
        const bool same = it->first == key;
        for (size_t u = 0; u < members.size(); ++u) {
          const size_t vstart = same ? u + 1 : 0;
          for (size_t v = vstart; v < it->second.size(); ++v) {
            double dist = (pts_.row(members[u]) - pts_.row(it->second[v])).norm();
            best = std::min(best, dist);
          }
        }
      }
    }
    found = std::isfinite(best);
    return best;
  }

private:
  std::vector<long long> coords_of(const Eigen::VectorXd& p) const {
    std::vector<long long> c(dim_);
    for (int a = 0; a < dim_; ++a)
      c[a] = static_cast<long long>(std::floor((p[a] - origin_[a]) / cell_));
    return c;
  }

  std::string key_of(const Eigen::VectorXd& p) const { return encode(coords_of(p)); }

  static std::string encode(const std::vector<long long>& c) {
    std::string s(c.size() * sizeof(long long), '\0');
    std::memcpy(s.data(), c.data(), s.size());
    return s;
  }

  std::vector<long long> decode(const std::string& s) const {
    std::vector<long long> c(dim_);
    std::memcpy(c.data(), s.data(), s.size());
    return c;
  }

  void gather_offsets(std::vector<std::vector<long long>>& out, std::vector<long long> prefix,
                      bool half) const {
    if (static_cast<int>(prefix.size()) == dim_) {
      if (!half) {
        out.push_back(prefix);
        return;
      }
      // Keep offsets that are lexicographically >= 0 so pairs are not doubled.
      for (long long v : prefix) {
        if (v > 0) break;
        if (v < 0) return;
      }
      out.push_back(prefix);
      return;
    }
    for (long long v = -1; v <= 1; ++v) {
      prefix.push_back(v);
      gather_offsets(out, prefix, half);
      prefix.pop_back();
    }
  }

  bool scan_ring(const Eigen::VectorXd& q, const std::vector<long long>& center, int ring,
                 double& best) const {
    bool any = false;
    std::vector<long long> c(dim_);
    scan_ring_rec(q, center, ring, 0, c, false, any, best);
    return any;
  }

  void scan_ring_rec(const Eigen::VectorXd& q, const std::vector<long long>& center, int ring,
                     int axis, std::vector<long long>& c, bool on_shell, bool& any,
                     double& best) const {
    if (axis == dim_) {
      if (ring > 0 && !on_shell) return;
      auto it = cells_.find(encode(c));
      if (it == cells_.end()) return;
      any = true;
      for (int idx : it->second)
        best = std::min(best, (pts_.row(idx).transpose() - q).norm());
      return;
    }
    for (long long off = -ring; off <= ring; ++off) {
      c[axis] = center[axis] + off;
      scan_ring_rec(q, center, ring, axis + 1, c, on_shell || std::abs(off) == ring, any, best);
    }
  }

  const Eigen::MatrixXd& pts_;
  double cell_;
  int dim_;
  Eigen::VectorXd origin_;
  std::unordered_map<std::string, std::vector<int>> cells_;
};

std::vector<int> first_primes(int count) {
  std::vector<int> primes;
  for (int candidate = 2; static_cast<int>(primes.size()) < count; ++candidate) {
    bool is_prime = true;
    for (int p : primes) {
      if (p * p > candidate) break;
      if (candidate % p == 0) {
        is_prime = false;
        break;
      }
    }
    if (is_prime) primes.push_back(candidate);
  }
  return primes;
}

double radical_inverse(int base, long long index) {
  double result = 0.0;
  double digit_weight = 1.0 / base;
  while (index > 0) {
    result += (index % base) * digit_weight;
    index /= base;
    digit_weight /= base;
  }
  return result;
}

int grid_points_per_axis(int n, int dim) {
  const int m = static_cast<int>(std::llround(std::pow(static_cast<double>(n), 1.0 / dim)));
  for (int cand : {m - 1, m, m + 1}) {
    if (cand < 1) continue;
    long long total = 1;
    for (int a = 0; a < dim; ++a) total *= cand;
    if (total == n) return cand;
  }
  std::ostringstream msg;
  msg << "grid sampling needs n to be a " << dim << "-th power, got n=" << n;
  throw ValidationError(msg.str());
}

void check_distinct(const Eigen::MatrixXd& pts) {
  const int n = static_cast<int>(pts.rows());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (int c = 0; c < pts.cols(); ++c) {
      if (pts(a, c) != pts(b, c)) return pts(a, c) < pts(b, c);
    }
    return false;
  });
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (pts(order[j], 0) - pts(order[i], 0) > kDistinctTol) break;
      if ((pts.row(order[i]) - pts.row(order[j])).lpNorm<Eigen::Infinity>() <= kDistinctTol) {
        std::ostringstream msg;
        msg << "locations " << order[i] << " and " << order[j]
            << " coincide within " << kDistinctTol;
        throw ValidationError(msg.str());
      }
    }
  }
}

} // namespace

BoxDomain::BoxDomain(Eigen::VectorXd lo, Eigen::VectorXd hi)
    : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() == 0 || lower.size() != upper.size())
    throw ValidationError("box bounds must be non-empty and of equal dimension");
  for (int a = 0; a < lower.size(); ++a) {
    if (!(upper[a] > lower[a])) {
      std::ostringstream msg;
      msg << "box has empty extent on axis " << a << ": [" << lower[a] << ", " << upper[a] << "]";
      throw ValidationError(msg.str());
    }
  }
}

BoxDomain BoxDomain::unit(int dim) {
  return BoxDomain(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim));
}

double BoxDomain::min_side() const {
  return (upper - lower).minCoeff();
}

bool BoxDomain::contains(const Eigen::VectorXd& p, double tol) const {
  if (p.size() != lower.size()) return false;
  for (int a = 0; a < lower.size(); ++a) {
    if (p[a] < lower[a] - tol || p[a] > upper[a] + tol) return false;
  }
  return true;
}

LocationSet::LocationSet(Eigen::MatrixXd pts) : points(std::move(pts)) {
  if (points.rows() < 1 || points.cols() < 1)
    throw ValidationError("location set must hold at least one point of dimension >= 1");
  check_distinct(points);
}

SamplingScheme sampling_scheme_from_string(const std::string& name) {
  if (name == "midpoint-grid") return SamplingScheme::MidpointGrid;
  if (name == "jittered-grid") return SamplingScheme::JitteredGrid;
  if (name == "uniform-random") return SamplingScheme::UniformRandom;
  if (name == "halton") return SamplingScheme::Halton;
  throw ValidationError("unknown sampling scheme: " + name);
}

std::string to_string(SamplingScheme scheme) {
  switch (scheme) {
    case SamplingScheme::MidpointGrid: return "midpoint-grid";
    case SamplingScheme::JitteredGrid: return "jittered-grid";
    case SamplingScheme::UniformRandom: return "uniform-random";
    case SamplingScheme::Halton: return "halton";
  }
  throw ValidationError("invalid sampling scheme value");
}

LocationSet generate_locations(int n, const BoxDomain& box, SamplingScheme scheme,
                               std::uint64_t seed) {
  if (n < 1) throw ValidationError("need at least one location");
  const int d = box.dim();
  Eigen::MatrixXd pts(n, d);

  switch (scheme) {
    case SamplingScheme::MidpointGrid:
    case SamplingScheme::JitteredGrid: {
      const int m = grid_points_per_axis(n, d);
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> jitter(-0.25, 0.25);
      std::vector<int> idx(d, 0);
      for (int i = 0; i < n; ++i) {
        for (int a = 0; a < d; ++a) {
          const double cell = box.side(a) / m;
          double u = idx[a] + 0.5;
          if (scheme == SamplingScheme::JitteredGrid) u += jitter(rng);
          pts(i, a) = box.lower[a] + u * cell;
        }
        for (int a = d - 1; a >= 0; --a) {
          if (++idx[a] < m) break;
          idx[a] = 0;
        }
      }
      break;
    }
    case SamplingScheme::UniformRandom: {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (int i = 0; i < n; ++i)
        for (int a = 0; a < d; ++a)
          pts(i, a) = box.lower[a] + unit(rng) * box.side(a);
      break;
    }
    case SamplingScheme::Halton: {
      const std::vector<int> bases = first_primes(d);
      for (int i = 0; i < n; ++i)
        for (int a = 0; a < d; ++a)
          pts(i, a) = box.lower[a] + radical_inverse(bases[a], i + 1) * box.side(a);
      break;
    }
  }
  return LocationSet(std::move(pts));
}

double separation_distance(const LocationSet& locations) {
  const Eigen::MatrixXd& pts = locations.points;
  const int n = locations.count();
  if (n < 2) throw ValidationError("separation distance needs at least two points");

  double min_dist = std::numeric_limits<double>::infinity();
  if (n <= 4096) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        min_dist = std::min(min_dist, (pts.row(i) - pts.row(j)).norm());
  } else {
    const Eigen::VectorXd extent =
        pts.colwise().maxCoeff().transpose() - pts.colwise().minCoeff().transpose();
    double cell = extent.maxCoeff() * std::pow(1.0 / n, 1.0 / locations.dim());
    if (!(cell > 0)) cell = 1.0;
    for (;;) {
      CellIndex index(pts, cell);
      bool found = false;
      double best = index.min_pairwise(found);
      if (found && best <= cell) {
        min_dist = best;
        break;
      }
      if (found) min_dist = std::min(min_dist, best);
      cell *= 2.0;
      if (cell > extent.maxCoeff() * 4.0) {
        // Every pair is now within one cell of its neighbor cells.
        CellIndex full(pts, cell);
        min_dist = full.min_pairwise(found);
        break;
      }
    }
  }
  return 0.5 * min_dist;
}

double fill_distance(const LocationSet& locations, const BoxDomain& box,
                     double probe_resolution) {
  const int d = locations.dim();
  if (d != box.dim())
    throw ValidationError("location set and box dimension mismatch");
  for (int i = 0; i < locations.count(); ++i) {
    if (!box.contains(locations.point(i), 1e-9))
      throw ValidationError("location outside the domain box");
  }

  if (d == 1) {
    std::vector<double> xs(locations.points.col(0).data(),
                           locations.points.col(0).data() + locations.count());
    std::sort(xs.begin(), xs.end());
    double fill = std::max(xs.front() - box.lower[0], box.upper[0] - xs.back());
    for (size_t i = 0; i + 1 < xs.size(); ++i)
      fill = std::max(fill, 0.5 * (xs[i + 1] - xs[i]));
    return fill;
  }

  double res = probe_resolution > 0 ? probe_resolution : box.min_side() / 512.0;
  std::vector<int> counts(d);
  std::vector<double> spacing(d);
  long long total = 1;
  for (int a = 0; a < d; ++a) {
    counts[a] = static_cast<int>(std::ceil(box.side(a) / res));
    spacing[a] = box.side(a) / counts[a];
    total *= counts[a] + 1;
  }
  if (total > 50'000'000)
    throw ValidationError("fill distance probe grid too large; pass a coarser resolution");

  const double avg_spacing =
      box.min_side() * std::pow(1.0 / locations.count(), 1.0 / d);
  CellIndex index(locations.points, std::max(avg_spacing, res));

  double fill = 0.0;
  std::vector<int> idx(d, 0);
  Eigen::VectorXd probe(d);
  for (long long it = 0; it < total; ++it) {
    for (int a = 0; a < d; ++a) probe[a] = box.lower[a] + idx[a] * spacing[a];
    fill = std::max(fill, index.nearest_distance(probe));
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] <= counts[a]) break;
      idx[a] = 0;
    }
  }
  return fill;
}

GeometryReport quasi_uniformity_report(const LocationSet& locations, const BoxDomain& box,
                                       double probe_resolution) {
  GeometryReport report;
  report.separation = separation_distance(locations);
  report.fill = fill_distance(locations, box, probe_resolution);
  report.ratio = report.fill / report.separation;
  report.probe_resolution =
      locations.dim() == 1
          ? 0.0
          : (probe_resolution > 0 ? probe_resolution : box.min_side() / 512.0);
  return report;
}

std::string location_set_to_json(const LocationSet& locations) {
  nlohmann::json doc;
  doc["dim"] = locations.dim();
  nlohmann::json pts = nlohmann::json::array();
  for (int i = 0; i < locations.count(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int a = 0; a < locations.dim(); ++a) row.push_back(locations.points(i, a));
    pts.push_back(std::move(row));
  }
  doc["points"] = std::move(pts);
  return doc.dump(2);
}

LocationSet location_set_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& err) {
    throw ValidationError(std::string("malformed location set JSON: ") + err.what());
  }
  if (!doc.contains("dim") || !doc.contains("points"))
    throw ValidationError("location set JSON must carry 'dim' and 'points'");
  const int d = doc["dim"].get<int>();
  const auto& pts = doc["points"];
  if (!pts.is_array() || pts.empty())
    throw ValidationError("location set JSON has no points");
  Eigen::MatrixXd mat(pts.size(), d);
  for (size_t i = 0; i < pts.size(); ++i) {
    if (!pts[i].is_array() || static_cast<int>(pts[i].size()) != d)
      throw ValidationError("location set JSON row has wrong dimension");
    for (int a = 0; a < d; ++a) mat(static_cast<int>(i), a) = pts[i][a].get<double>();
  }
  return LocationSet(std::move(mat));
}

} // namespace svirkit
