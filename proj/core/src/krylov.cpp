#include "skipgp/krylov.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "skipgp/random.hpp"

namespace skipgp {

CgResult cg_solve(const LinearOperator& op, const Vector& rhs,
                  const CgOptions& options) {
  const Index n = op.size();
  require_size(rhs.size(), n, "cg_solve");
  if (!(options.tolerance > 0.0)) throw InvalidArgument("cg_solve: tol <= 0");
  if (options.max_iterations < 0) {
    throw InvalidArgument("cg_solve: max_iterations < 0");
  }
  const Index max_iters = options.max_iterations == 0
                              ? std::min<Index>(n, 1000)
                              : options.max_iterations;

  CgResult result;
  result.solution = Vector::Zero(n);
  const double rhs_norm = rhs.norm();
  if (!std::isfinite(rhs_norm)) {
    throw NumericalBreakdown("cg_solve: non-finite right-hand side", 0);
  }
  if (rhs_norm == 0.0) {
    result.converged = true;
    result.residual_history.push_back(0.0);
    return result;
  }

  Vector residual = rhs;
  Vector direction = residual;
  double rr = residual.squaredNorm();
  result.residual_history.push_back(1.0);
  result.relative_residual = 1.0;

  for (Index k = 1; k <= max_iters; ++k) {
    const Vector ad = op.apply(direction);
    const double curvature = direction.dot(ad);
    if (!std::isfinite(curvature) || curvature <= 0.0) {
      throw NumericalBreakdown("cg_solve: non-positive or non-finite curvature",
                               k);
    }
    const double step = rr / curvature;
    result.solution.noalias() += step * direction;
    residual.noalias() -= step * ad;
    const double rr_next = residual.squaredNorm();
    if (!std::isfinite(rr_next)) {
      throw NumericalBreakdown("cg_solve: non-finite residual", k);
    }
    result.iterations = k;
    result.relative_residual = std::sqrt(rr_next) / rhs_norm;
    result.residual_history.push_back(result.relative_residual);
    if (result.relative_residual <= options.tolerance) {
      result.converged = true;
      break;
    }
    direction = residual + (rr_next / rr) * direction;
    rr = rr_next;
  }
  return result;
}

LanczosFactor lanczos_decompose(const LinearOperator& op, const Vector& probe,
                                Index rank) {
  const Index n = op.size();
  require_size(probe.size(), n, "lanczos_decompose probe");
  if (rank < 1 || rank > n) {
    throw DimensionError("lanczos_decompose: rank must lie in [1, n]");
  }
  const double probe_norm = probe.norm();
  if (!(probe_norm > 0.0) || !std::isfinite(probe_norm)) {
    throw InvalidArgument("lanczos_decompose: probe must be nonzero and finite");
  }

  Matrix basis(n, rank);
  std::vector<double> alpha;
  std::vector<double> beta;
  alpha.reserve(rank);
  beta.reserve(rank);
  basis.col(0) = probe / probe_norm;
  double norm_estimate = 0.0;

  for (Index j = 0; j < rank; ++j) {
    Vector w = op.apply(basis.col(j));
    const double a = basis.col(j).dot(w);
    alpha.push_back(a);
    w.noalias() -= a * basis.col(j);
    if (j > 0) w.noalias() -= beta[j - 1] * basis.col(j - 1);
    // Full reorthogonalization, two passes.
    for (int pass = 0; pass < 2; ++pass) {
      const auto previous = basis.leftCols(j + 1);
      const Vector coeffs = previous.transpose() * w;
      w.noalias() -= previous * coeffs;
    }
    const double b = w.norm();
    norm_estimate = std::max(
        norm_estimate, std::abs(a) + b + (j > 0 ? beta[j - 1] : 0.0));
    if (j + 1 == rank) break;
    if (b <= kLanczosBreakdownTolerance * norm_estimate || !std::isfinite(b)) {
      break;
    }
    beta.push_back(b);
    basis.col(j + 1) = w / b;
  }

  const Index achieved = static_cast<Index>(alpha.size());
  LanczosFactor factor;
  factor.basis = basis.leftCols(achieved);
  factor.alpha = Eigen::Map<const Vector>(alpha.data(), achieved);
  factor.beta = Eigen::Map<const Vector>(beta.data(), achieved - 1);
  return factor;
}

SlqEstimate slq_logdet(const LinearOperator& op, Index num_probes, Index rank,
                       std::uint64_t seed) {
  if (num_probes < 1) throw InvalidArgument("slq_logdet: num_probes < 1");
  if (rank < 1) throw InvalidArgument("slq_logdet: rank < 1");
  const Index n = op.size();
  const Index steps = std::min(rank, n);

  SlqEstimate estimate;
  estimate.num_probes = num_probes;
  estimate.probe_seed = seed;
  double total = 0.0;
  for (Index p = 0; p < num_probes; ++p) {
    const Vector probe =
        unit_normal_probe(n, derive_seed(seed, static_cast<std::uint64_t>(p)));
    const LanczosFactor factor = lanczos_decompose(op, probe, steps);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(factor.tridiagonal());
    const Vector& ritz = eig.eigenvalues();
    double quadrature = 0.0;
    for (Index j = 0; j < ritz.size(); ++j) {
      const double weight = eig.eigenvectors()(0, j) * eig.eigenvectors()(0, j);
      double value = ritz[j];
      if (!(value > kRitzValueFloor)) {
        value = kRitzValueFloor;
        ++estimate.clamped_ritz_values;
      }
      quadrature += weight * std::log(value);
    }
    total += quadrature;
  }
  estimate.logdet = static_cast<double>(n) / static_cast<double>(num_probes) *
                    total;
  return estimate;
}

}  // namespace skipgp
