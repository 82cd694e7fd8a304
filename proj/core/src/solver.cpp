#include "svirkit/solver.hpp"

#include <cmath>
#include <string>

#include <Eigen/QR>

#include "svirkit/errors.hpp"

namespace svirkit {

namespace {

constexpr double kSolveRelTol = 1e-10;
constexpr int kMaxRefinements = 3;

double pairwise_distance(const Eigen::MatrixXd& pts, int i, int j) {
  return (pts.row(i) - pts.row(j)).norm();
}

Eigen::VectorXd refined_solve(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu,
                              const Eigen::MatrixXd& system, const Eigen::VectorXd& rhs,
                              const char* what) {
  Eigen::VectorXd x = lu.solve(rhs);
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return Eigen::VectorXd::Zero(rhs.size());
  for (int pass = 0; pass < kMaxRefinements; ++pass) {
    Eigen::VectorXd residual = rhs - system * x;
    if (residual.norm() <= kSolveRelTol * rhs_norm) return x;
    x += lu.solve(residual);
  }
  if ((rhs - system * x).norm() <= kSolveRelTol * rhs_norm) return x;
  throw NumericalError(std::string(what) + ": residual stalled above 1e-10 of |rhs|");
}

} // namespace

GramSystem assemble_gram(const KernelTable& table, const LocationSet& centers, double mu) {
  if (mu < 0.0) throw ValidationError("assemble_gram: mu must be nonnegative");
  if (centers.dim() != table.spec.dim)
    throw ValidationError("assemble_gram: location dimension does not match the kernel");
  const int n = centers.count();
  GramSystem out;
  out.mu = mu;
  out.ridge = static_cast<double>(n) * mu;
  out.matrix.resize(n, n);
  for (int i = 0; i < n; ++i) {
    out.matrix(i, i) = table.rho_zero + out.ridge;
    for (int j = i + 1; j < n; ++j) {
      const double v = evaluate(table, pairwise_distance(centers.points, i, j));
      out.matrix(i, j) = v;
      out.matrix(j, i) = v;
    }
  }
  return out;
}

ChannelFactorization factorize(const GramSystem& system, double weight_value) {
  ChannelFactorization fact;
  fact.system = system.matrix;
  fact.weight = weight_value;
  fact.llt.compute(fact.system);
  if (fact.llt.info() != Eigen::Success) {
    const double jitter = 1e-12 * fact.system.diagonal().mean();
    fact.system.diagonal().array() += jitter;
    fact.jittered = true;
    fact.llt.compute(fact.system);
    if (fact.llt.info() != Eigen::Success)
      throw NumericalError("factorize: Cholesky failed even after diagonal jitter");
  }
  return fact;
}

double factorization_residual(const ChannelFactorization& fact) {
  const Eigen::MatrixXd l = fact.llt.matrixL();
  const double scale = fact.system.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (fact.system - l * l.transpose()).cwiseAbs().maxCoeff() / scale;
}

Eigen::VectorXd solve_channel(const ChannelFactorization& fact, const Eigen::VectorXd& rhs) {
  if (rhs.size() != fact.system.rows())
    throw ValidationError("solve_channel: rhs length does not match the system");
  ++fact.solve_count;
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return Eigen::VectorXd::Zero(rhs.size());
  Eigen::VectorXd x = fact.llt.solve(rhs);
  for (int pass = 0; pass < kMaxRefinements; ++pass) {
    Eigen::VectorXd residual = rhs - fact.system * x;
    if (residual.norm() <= kSolveRelTol * rhs_norm) return x;
    x += fact.llt.solve(residual);
  }
  if ((rhs - fact.system * x).norm() <= kSolveRelTol * rhs_norm) return x;
  throw NumericalError("solve_channel: residual stalled above 1e-10 of |rhs|");
}

GroupedSolveResult solve_grouped(const std::vector<KernelTable>& group_tables,
                                 const WeightSequence& weights, const LocationSet& centers,
                                 const Eigen::MatrixXd& observations, double mu) {
  const int channels = static_cast<int>(weights.weights.size());
  if (observations.rows() != channels)
    throw ValidationError("solve_grouped: observations must have one row per channel");
  if (observations.cols() != centers.count())
    throw ValidationError("solve_grouped: observations must have one column per center");
  if (group_tables.size() != weights.groups.size())
    throw ValidationError("solve_grouped: need exactly one kernel table per weight group");

  GroupedSolveResult out;
  out.coefficients.resize(channels, centers.count());
  out.solves_per_factorization.reserve(weights.groups.size());
  for (std::size_t g = 0; g < weights.groups.size(); ++g) {
    const WeightGroup& group = weights.groups[g];
    const KernelTable& table = group_tables[g];
    if (std::abs(table.spec.weight - group.value) > 1e-12 * std::max(1.0, group.value))
      throw ValidationError("solve_grouped: kernel table weight does not match its group");
    const ChannelFactorization fact = factorize(assemble_gram(table, centers, mu), group.value);
    ++out.factorization_count;
    int solves = 0;
    for (int k : group.channels) {
      out.coefficients.row(k) = solve_channel(fact, observations.row(k).transpose()).transpose();
      ++solves;
    }
    out.solves_per_factorization.push_back(solves);
  }
  return out;
}

Eigen::MatrixXd monomial_matrix(const Eigen::MatrixXd& points, int order) {
  if (order < 1) throw ValidationError("monomial_matrix: order must be at least 1");
  const int d = static_cast<int>(points.cols());
  if (d != 1 && d != 2) throw ValidationError("monomial_matrix: dimension must be 1 or 2");
  const int n = static_cast<int>(points.rows());
  const int p = polynomial_dim(order, d);
  Eigen::MatrixXd out(n, p);
  int col = 0;
  // Total degree ascending; within a degree the power of the first
  // coordinate descends.  Matches polynomial_dim(order, d) columns.
  for (int degree = 0; degree <= order - 1; ++degree) {
    if (d == 1) {
      for (int i = 0; i < n; ++i) out(i, col) = std::pow(points(i, 0), degree);
      ++col;
    } else {
      for (int a = degree; a >= 0; --a) {
        const int b = degree - a;
        for (int i = 0; i < n; ++i)
          out(i, col) = std::pow(points(i, 0), a) * std::pow(points(i, 1), b);
        ++col;
      }
    }
  }
  return out;
}

CpdSystem cpd_factorize(const LocationSet& centers, int order, double mu) {
  if (mu < 0.0) throw ValidationError("cpd_factorize: mu must be nonnegative");
  const int d = centers.dim();
  if (d != 1 && d != 2) throw ValidationError("cpd_factorize: dimension must be 1 or 2");
  if (order < 1) throw ValidationError("cpd_factorize: order must be at least 1");
  if (2 * order <= d) throw ValidationError("cpd_factorize: need 2 * order > dimension");

  CpdSystem out;
  out.order = order;
  out.dim = d;
  out.mu = mu;
  const int n = centers.count();
  out.monomials = monomial_matrix(centers.points, order);
  const int p = static_cast<int>(out.monomials.cols());
  if (n < p)
    throw ValidationError("cpd_factorize: need at least " + std::to_string(p) +
                          " centers for the degree-" + std::to_string(order - 1) +
                          " polynomial block");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(out.monomials);
  if (qr.rank() < p)
    throw NumericalError("cpd_factorize: centers do not determine a unique degree-" +
                         std::to_string(order - 1) + " polynomial (degenerate layout)");

  // Flipping the kernel by its conditional-definiteness sign makes the ridge
  // push the saddle system away from singularity instead of toward it.
  const double sign = cpd_sign(order, d);
  const double ridge = static_cast<double>(n) * mu;
  out.saddle = Eigen::MatrixXd::Zero(n + p, n + p);
  for (int i = 0; i < n; ++i) {
    out.saddle(i, i) = ridge;
    for (int j = i + 1; j < n; ++j) {
      const double v = sign * polyharmonic(order, d, pairwise_distance(centers.points, i, j));
      out.saddle(i, j) = v;
      out.saddle(j, i) = v;
    }
  }
  out.saddle.block(0, n, n, p) = out.monomials;
  out.saddle.block(n, 0, p, n) = out.monomials.transpose();
  out.lu.compute(out.saddle);
  const double pivot_floor = 1e-13 * out.saddle.cwiseAbs().maxCoeff();
  if (out.lu.matrixLU().diagonal().cwiseAbs().minCoeff() <= pivot_floor)
    throw NumericalError("cpd_factorize: saddle system is numerically singular");
  return out;
}

CpdSolution cpd_solve(const CpdSystem& system, const Eigen::VectorXd& rhs) {
  const int n = static_cast<int>(system.monomials.rows());
  const int p = static_cast<int>(system.monomials.cols());
  if (rhs.size() != n)
    throw ValidationError("cpd_solve: rhs length does not match the center count");
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(n + p);
  padded.head(n) = rhs;
  const Eigen::VectorXd x = refined_solve(system.lu, system.saddle, padded, "cpd_solve");
  CpdSolution out;
  out.kernel_coeffs = x.head(n);
  out.poly_coeffs = x.tail(p);
  return out;
}

} // namespace svirkit
