#include "svirkit/kernel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

#include "svirkit/errors.hpp"
#include "little_endian.hpp"

namespace svirkit {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTailRatio = 1e-10;      // |rho| <= kTailRatio * rho(0) counts as zero
constexpr double kRminRatio = 1e-6;       // radii[0] = kRminRatio * r_max
constexpr double kRhoZeroRelTol = 1e-12;  // fixed so rho(0) reproduces bit-exactly on load

// 7-15 Gauss-Kronrod pair.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
double gk15(F&& f, double lo, double hi, double& err) {
  const double c = 0.5 * (lo + hi);
  const double h = 0.5 * (hi - lo);
  const double fc = f(c);
  double resk = kWgk[7] * fc;
  double resg = kWg[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kXgk[i];
    const double f1 = f(c - dx);
    const double f2 = f(c + dx);
    resk += kWgk[i] * (f1 + f2);
    if (i % 2 == 1) resg += kWg[i / 2] * (f1 + f2);
  }
  err = std::abs(resk - resg) * h;
  return resk * h;
}

struct QuadBudget {
  long panels_left = 40000;
  double worst_radius = 0.0;
};

template <class F>
double adaptive_quad(F&& f, double lo, double hi, double abs_tol, QuadBudget& budget) {
  struct Seg {
    double lo, hi, val, err;
    int depth;
  };
  double err0 = 0.0;
  const double v0 = gk15(f, lo, hi, err0);
  std::vector<Seg> work{{lo, hi, v0, err0, 0}};
  const double span = hi - lo;
  double total = 0.0;
  while (!work.empty()) {
    Seg s = work.back();
    work.pop_back();
    const double local_tol = abs_tol * std::max((s.hi - s.lo) / span, 1e-6);
    if (s.err <= local_tol || s.depth >= 40) {
      if (s.err > local_tol) {
        std::ostringstream msg;
        msg << "quadrature failed to converge near t = " << 0.5 * (s.lo + s.hi)
            << " (radius " << budget.worst_radius << ")";
        throw NumericalError(msg.str());
      }
      total += s.val;
      continue;
    }
    if (--budget.panels_left < 0) {
      std::ostringstream msg;
      msg << "quadrature panel budget exhausted (radius " << budget.worst_radius << ")";
      throw NumericalError(msg.str());
    }
    const double mid = 0.5 * (s.lo + s.hi);
    double e1 = 0.0, e2 = 0.0;
    const double v1 = gk15(f, s.lo, mid, e1);
    const double v2 = gk15(f, mid, s.hi, e2);
    work.push_back({s.lo, mid, v1, e1, s.depth + 1});
    work.push_back({mid, s.hi, v2, e2, s.depth + 1});
  }
  return total;
}

double bessel_j0_zero(int k) {
  static const double first[10] = {
      2.404825557695773,  5.520078110286311,  8.653727912911013, 11.791534439014281,
      14.930917708487787, 18.071063967910924, 21.21163662987926, 24.352471530749302,
      27.493479132040253, 30.634606468431976};
  if (k <= 10) return first[k - 1];
  const double beta = (k - 0.25) * kPi;
  const double u = 1.0 / (8.0 * beta);
  return beta + u - (124.0 / 3.0) * u * u * u + (120928.0 / 15.0) * u * u * u * u * u;
}

// Last few partial sums averaged repeatedly; for alternating tails this
// converges geometrically faster than the raw sequence.
double euler_accelerate(const std::vector<double>& partials) {
  const int k = std::min<int>(10, static_cast<int>(partials.size()));
  std::vector<double> buf(partials.end() - k, partials.end());
  for (int len = k; len > 1; --len)
    for (int i = 0; i + 1 < len; ++i) buf[i] = 0.5 * (buf[i] + buf[i + 1]);
  return buf[0];
}

// Bound on the integral of |f| beyond T, using g(t) <= 1/(a t^(2s)).
double algebraic_tail_bound(const RadialKernelSpec& spec, double T) {
  const double a = spec.a();
  if (spec.dim == 1) {
    // f(t) = g(t): tail <= T^(1-2s) / (a (2s-1))
    return std::pow(T, 1.0 - 2.0 * spec.order) / (a * (2.0 * spec.order - 1.0));
  }
  // d = 2: f(t) = t g(t): tail <= T^(2-2s) / (a (2s-2))
  return std::pow(T, 2.0 - 2.0 * spec.order) / (a * (2.0 * spec.order - 2.0));
}

double knee_scale(const RadialKernelSpec& spec) {
  return std::pow(spec.b() / spec.a(), 1.0 / (2.0 * spec.order));
}

// rho(0): positive integrand, geometric panels with an analytic tail bound.
double invert_zero(const RadialKernelSpec& spec, double rel_tol) {
  const double a = spec.a();
  const double b = spec.b();
  const int d = spec.dim;
  const int s2 = 2 * spec.order;
  const auto f = [&](double t) { return std::pow(t, d - 1) / (a * std::pow(t, s2) + b); };
  const double t_knee = knee_scale(spec);
  QuadBudget budget;
  double acc = adaptive_quad(f, 0.0, t_knee, rel_tol * std::pow(t_knee, d) / b * 0.01, budget);
  double lo = t_knee;
  for (int k = 0; k < 200; ++k) {
    const double hi = lo * 2.0;
    const double panel = adaptive_quad(f, lo, hi, rel_tol * std::abs(acc) * 0.01 + 1e-300, budget);
    acc += panel;
    lo = hi;
    const double tail = std::pow(lo, d - s2) / (a * (s2 - d));
    if (tail <= rel_tol * std::abs(acc)) break;
  }
  const double angular = d == 1 ? std::sqrt(2.0 / kPi) : 1.0;
  return angular * acc;
}

// rho(r) to absolute tolerance abs_tol for r > 0.
double invert_radius(const RadialKernelSpec& spec, double r, double abs_tol) {
  const double a = spec.a();
  const double b = spec.b();
  const int d = spec.dim;
  const int s2 = 2 * spec.order;
  const double prefac = d == 1 ? std::sqrt(2.0 / kPi) : 1.0;

  const auto f = [&](double t) {
    const double g = 1.0 / (a * std::pow(t, s2) + b);
    const double osc = d == 1 ? std::cos(r * t) : std::cyl_bessel_j(0.0, r * t);
    return (d == 1 ? g : t * g) * osc;
  };
  const auto zero_at = [&](int k) {
    return (d == 1 ? (k - 0.5) * kPi : bessel_j0_zero(k)) / r;
  };

  QuadBudget budget;
  budget.worst_radius = r;
  const double tol = abs_tol / prefac;
  const double t_knee = knee_scale(spec);

  // Point beyond which even |osc| = 1 cannot push the tail above tolerance.
  double t_big = std::max(t_knee, 1.0);
  while (algebraic_tail_bound(spec, t_big) > 0.2 * tol && t_big < 1e18) t_big *= 2.0;

  const double t1 = zero_at(1);
  double acc = 0.0;
  {
    // Head [0, min(t1, t_big)] in geometric slices so the knee is resolved.
    const double head_end = std::min(t1, t_big);
    double lo = 0.0;
    double hi = std::min(head_end, t_knee);
    int guard = 0;
    while (lo < head_end && guard++ < 300) {
      acc += adaptive_quad(f, lo, hi, tol * 0.02, budget);
      lo = hi;
      hi = std::min(head_end, hi * 2.0);
    }
    if (t1 >= t_big) return prefac * acc; // oscillation never matters
  }

  std::vector<double> partials{acc};
  double prev_accel = acc;
  for (int k = 1; k <= 400; ++k) {
    const double lo = zero_at(k);
    const double hi = zero_at(k + 1);
    const double panel = adaptive_quad(f, lo, hi, tol * 0.02, budget);
    acc += panel;
    partials.push_back(acc);
    if (lo > t_big && std::abs(panel) < 0.05 * tol) return prefac * acc;
    if (partials.size() >= 6) {
      const double accel = euler_accelerate(partials);
      if (std::abs(accel - prev_accel) < 0.2 * tol) return prefac * accel;
      prev_accel = accel;
    }
  }
  std::ostringstream msg;
  msg << "oscillatory quadrature did not settle at radius " << r;
  throw NumericalError(msg.str());
}

// Interpolation slopes: fourth-order differences on the (uniform in log r)
// grid, then a Fritsch-Carlson limiter wherever the data is locally monotone.
Eigen::VectorXd hermite_slopes(const Eigen::VectorXd& radii, const Eigen::VectorXd& values) {
  const int m = static_cast<int>(radii.size());
  Eigen::VectorXd dlog(m); // dv/d(log r)
  const double h = std::log(radii[1] / radii[0]);
  for (int i = 0; i < m; ++i) {
    if (i >= 2 && i + 2 < m) {
      dlog[i] = (values[i - 2] - 8.0 * values[i - 1] + 8.0 * values[i + 1] - values[i + 2]) /
                (12.0 * h);
    } else if (i == 0) {
      dlog[i] = (values[1] - values[0]) / h;
    } else if (i == m - 1) {
      dlog[i] = (values[m - 1] - values[m - 2]) / h;
    } else {
      dlog[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
    }
  }
  Eigen::VectorXd slopes(m);
  for (int i = 0; i < m; ++i) slopes[i] = dlog[i] / radii[i];

  for (int i = 0; i + 1 < m; ++i) {
    const double delta = (values[i + 1] - values[i]) / (radii[i + 1] - radii[i]);
    if (delta == 0.0) {
      slopes[i] = 0.0;
      slopes[i + 1] = 0.0;
      continue;
    }
    for (int j : {i, i + 1}) {
      const double ratio = slopes[j] / delta;
      if (ratio < 0.0)
        slopes[j] = 0.0;
      else if (ratio > 3.0)
        slopes[j] = 3.0 * delta;
    }
  }
  return slopes;
}

} // namespace

RadialKernelSpec::RadialKernelSpec(int d, int s, double alpha_, double weight_)
    : dim(d), order(s), alpha(alpha_), weight(weight_) {
  if (d != 1 && d != 2) throw ValidationError("radial kernel supports dim 1 or 2");
  if (s < 1) throw ValidationError("kernel order must be a positive integer");
  if (2 * s <= d) throw ValidationError("kernel needs 2s > d for an integrable profile");
  if (!(alpha >= 0.0) || alpha >= 1.0) throw ValidationError("alpha must lie in [0, 1)");
  if (!(weight >= 0.0)) throw ValidationError("channel weight must be nonnegative");
}

double spectral_profile(const RadialKernelSpec& spec, double xi_norm) {
  if (xi_norm < 0) throw ValidationError("profile argument must be nonnegative");
  return 1.0 / (spec.a() * std::pow(xi_norm, 2 * spec.order) + spec.b());
}

double invert_profile(const RadialKernelSpec& spec, double r, double tol) {
  if (!spec.positive_definite())
    throw ValidationError("profile inversion needs a positive definite spec (alpha*w > 0)");
  if (r < 0) throw ValidationError("radius must be nonnegative");
  if (!(tol > 0) || tol > 1e-2) throw ValidationError("quadrature tolerance out of range");
  if (r == 0.0) return invert_zero(spec, std::min(tol, kRhoZeroRelTol));
  const double scale = invert_zero(spec, kRhoZeroRelTol);
  return invert_radius(spec, r, tol * scale);
}

KernelTable build_table(const RadialKernelSpec& spec, double r_max, int nodes, double quad_tol) {
  if (!spec.positive_definite())
    throw ValidationError("kernel tables require a positive definite spec; "
                          "use the polyharmonic path when alpha*w = 0");
  if (!(r_max > 0)) throw ValidationError("table r_max must be positive");
  if (nodes < 16) throw ValidationError("table needs at least 16 nodes");
  if (!(quad_tol > 0) || quad_tol > 1e-2)
    throw ValidationError("quadrature tolerance out of range");

  KernelTable table;
  table.spec = spec;
  table.r_max = r_max;
  table.rho_zero = invert_zero(spec, kRhoZeroRelTol);

  const double r_min = kRminRatio * r_max;
  table.radii.resize(nodes);
  table.values.resize(nodes);
  const double step = std::log(r_max / r_min) / (nodes - 1);
  // Node accuracy must sit well under the 1e-10 tail threshold or the
  // cutoff scan would read quadrature noise as signal.
  const double abs_tol =
      std::max(quad_tol * 0.01, 1e-14) * std::abs(table.rho_zero);
  for (int i = 0; i < nodes; ++i) {
    const double r = i + 1 == nodes ? r_max : r_min * std::exp(step * i);
    table.radii[i] = r;
    table.values[i] = invert_radius(spec, r, abs_tol);
  }
  table.slopes = hermite_slopes(table.radii, table.values);

  const double floor = kTailRatio * std::abs(table.rho_zero);
  int cut = nodes;
  for (int i = nodes - 1; i >= 0; --i) {
    if (std::abs(table.values[i]) > floor) break;
    cut = i;
  }
  table.tail_cutoff =
      cut < nodes ? table.radii[cut] : std::numeric_limits<double>::infinity();
  return table;
}

double evaluate(const KernelTable& table, double r) {
  if (r < 0) throw ValidationError("kernel radius must be nonnegative");
  if (table.radii.size() < 2) throw ValidationError("kernel table is empty");
  if (r > table.tail_cutoff) return 0.0;
  if (r > table.r_max) {
    std::ostringstream msg;
    msg << "radius " << r << " beyond table range " << table.r_max
        << " with tail still above the cutoff";
    throw NumericalError(msg.str());
  }
  const double r_min = table.radii[0];
  if (r <= r_min) {
    // Linear blend from rho(0) to the first node.
    return table.rho_zero + (table.values[0] - table.rho_zero) * (r / r_min);
  }
  const double* begin = table.radii.data();
  const double* end = begin + table.radii.size();
  int i = static_cast<int>(std::upper_bound(begin, end, r) - begin) - 1;
  i = std::min<int>(i, static_cast<int>(table.radii.size()) - 2);
  const double h = table.radii[i + 1] - table.radii[i];
  const double t = (r - table.radii[i]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return table.values[i] * (2 * t3 - 3 * t2 + 1) + table.slopes[i] * h * (t3 - 2 * t2 + t) +
         table.values[i + 1] * (-2 * t3 + 3 * t2) + table.slopes[i + 1] * h * (t3 - t2);
}

double polyharmonic(int order, int dim, double r) {
  if (2 * order <= dim)
    throw ValidationError("polyharmonic kernel needs 2s > d");
  if (r < 0) throw ValidationError("radius must be nonnegative");
  const int expo = 2 * order - dim;
  if (dim % 2 == 1) return std::pow(r, expo);
  if (r == 0.0) return 0.0;
  return std::pow(r, expo) * std::log(r);
}

double cpd_sign(int order, int dim) {
  const int k = dim % 2 == 1 ? order - (dim - 1) / 2 : order - dim / 2 + 1;
  return k % 2 == 0 ? 1.0 : -1.0;
}

int polynomial_dim(int order, int dim) {
  // C(s-1+d, d)
  long long num = 1, den = 1;
  for (int i = 1; i <= dim; ++i) {
    num *= order - 1 + i;
    den *= i;
  }
  return static_cast<int>(num / den);
}

void write_kernel_blob(std::ostream& out, const KernelTable& table) {
  std::string buf;
  buf.reserve(8 * (6 + 2 * table.radii.size()));
  detail::append_le(buf, static_cast<double>(table.spec.dim));
  detail::append_le(buf, static_cast<double>(table.spec.order));
  detail::append_le(buf, table.spec.alpha);
  detail::append_le(buf, table.spec.weight);
  detail::append_le(buf, static_cast<double>(table.radii.size()));
  detail::append_le(buf, table.r_max);
  for (int i = 0; i < table.radii.size(); ++i) detail::append_le(buf, table.radii[i]);
  for (int i = 0; i < table.values.size(); ++i) detail::append_le(buf, table.values[i]);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw ValidationError("failed to write kernel blob");
}

KernelTable read_kernel_blob(std::istream& in) {
  const double d = detail::read_le(in, "kernel blob");
  const double s = detail::read_le(in, "kernel blob");
  const double alpha = detail::read_le(in, "kernel blob");
  const double w = detail::read_le(in, "kernel blob");
  const double m = detail::read_le(in, "kernel blob");
  const double r_max = detail::read_le(in, "kernel blob");
  if (m < 2 || m > 1e8 || m != std::floor(m))
    throw ValidationError("kernel blob has a corrupt node count");
  KernelTable table;
  table.spec = RadialKernelSpec(static_cast<int>(d), static_cast<int>(s), alpha, w);
  table.r_max = r_max;
  const int nodes = static_cast<int>(m);
  table.radii.resize(nodes);
  table.values.resize(nodes);
  for (int i = 0; i < nodes; ++i) table.radii[i] = detail::read_le(in, "kernel blob");
  for (int i = 0; i < nodes; ++i) table.values[i] = detail::read_le(in, "kernel blob");
  table.rho_zero = invert_zero(table.spec, kRhoZeroRelTol);
  table.slopes = hermite_slopes(table.radii, table.values);
  const double floor = kTailRatio * std::abs(table.rho_zero);
  int cut = nodes;
  for (int i = nodes - 1; i >= 0; --i) {
    if (std::abs(table.values[i]) > floor) break;
    cut = i;
  }
  table.tail_cutoff =
      cut < nodes ? table.radii[cut] : std::numeric_limits<double>::infinity();
  return table;
}

} // namespace svirkit
