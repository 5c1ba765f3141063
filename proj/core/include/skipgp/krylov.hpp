#pragma once

#include <cstdint>
#include <vector>

#include "skipgp/linop.hpp"

namespace skipgp {

struct CgOptions {
  double tolerance = 1e-6;
  // 0 selects min(n, 1000).
  Index max_iterations = 0;
};

struct CgResult {
  Vector solution;
  Index iterations = 0;
  // ||A x - b|| / ||b|| from the CG recurrence at exit.
  double relative_residual = 0.0;
  bool converged = false;
  // Relative residual after each iteration; entry 0 is the initial residual.
  std::vector<double> residual_history;
};

// Conjugate gradients for SPD operators, starting from x = 0. Each iteration
// performs exactly one operator apply. Throws NumericalBreakdown when the
// recurrence produces a non-finite value or non-positive curvature.
CgResult cg_solve(const LinearOperator& op, const Vector& rhs,
                  const CgOptions& options = {});

// Lanczos tridiagonalization with full (two-pass Gram-Schmidt)
// reorthogonalization. Runs at most `rank` iterations, one operator apply
// each, and stops early when the next off-diagonal falls below
// kLanczosBreakdownTolerance times the running norm estimate.
LanczosFactor lanczos_decompose(const LinearOperator& op, const Vector& probe,
                                Index rank);

inline constexpr double kLanczosBreakdownTolerance = 1e-10;

struct SlqEstimate {
  double logdet = 0.0;
  Index num_probes = 0;
  std::uint64_t probe_seed = 0;
  // Ritz values at or below the floor that were clamped before the log.
  Index clamped_ritz_values = 0;
};

inline constexpr double kRitzValueFloor = 1e-12;

// Stochastic Lanczos quadrature estimate of log|A| for SPD A. Probes are unit
// normalized standard normal vectors drawn from derive_seed(seed, probe).
SlqEstimate slq_logdet(const LinearOperator& op, Index num_probes, Index rank,
                       std::uint64_t seed);

}  // namespace skipgp
