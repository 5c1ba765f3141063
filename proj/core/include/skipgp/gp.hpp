#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "skipgp/kernels.hpp"
#include "skipgp/linop.hpp"
#include "skipgp/ski.hpp"
#include "skipgp/skip.hpp"

namespace skipgp {

enum class InferenceMode { kExactDense, kSkip };

std::string to_string(InferenceMode mode);
InferenceMode inference_mode_from_string(const std::string& name);

struct SkipSettings {
  Index grid_size = kDefaultGridSize;
  // Lanczos rank for the product decomposition and for SLQ.
  Index rank = kDefaultSkipRank;
  Index num_probes = 30;
  std::uint64_t probe_seed = 0;
  double cg_tolerance = 1e-6;
  Index max_cg_iterations = 0;
  // Rebuild SKI grids when prediction inputs fall outside them.
  bool rebuild_grid = true;
};

struct GpModel {
  KernelSpec kernel;
  double noise_variance = 0.1;
  double constant_mean = 0.0;
  InferenceMode mode = InferenceMode::kExactDense;
  SkipSettings skip;
};

// lengthscale = per-dimension standard deviation of X (shared: their mean),
// outputscale = var(y), noise = 0.1 var(y), mean = mean(y).
GpModel initialize_model(const Matrix& x, const Vector& y, KernelFamily family,
                         bool ard, InferenceMode mode);

// Noise actually used in K + sigma^2 I: the model's value floored at
// 1e-6 var(y) (1e-6 when y is constant).
double effective_noise(const GpModel& model, const Vector& y);

// [log lengthscales..., log outputscale, log noise]. The mean is held fixed.
Vector pack_log_hyperparameters(const GpModel& model);
GpModel unpack_log_hyperparameters(const GpModel& base, const Vector& theta);

struct PhaseTimes {
  double decompose_seconds = 0.0;
  double solve_seconds = 0.0;
  double logdet_seconds = 0.0;
  double total_seconds = 0.0;
};

struct MllResult {
  double value = 0.0;
  double quadratic_term = 0.0;  // (y - mu)^T K^-1 (y - mu)
  double logdet = 0.0;
  Index cg_iterations = 0;
  double cg_residual = 0.0;
  Index clamped_ritz_values = 0;
  // Applies of K + sigma^2 I during CG and SLQ, and of the 1-D SKI leaves
  // during decomposition (skip mode only).
  std::uint64_t kernel_applies = 0;
  std::uint64_t leaf_applies = 0;
  PhaseTimes times;
};

// -1/2 r^T K^-1 r - 1/2 log|K| - n/2 log(2 pi), r = y - mu, K = K_XX + s2 I.
// Exact mode uses a dense Cholesky factorization; skip mode rebuilds the SKI
// components and their product decomposition, solves with CG and estimates
// log|K| with SLQ. CG failing to reach its tolerance raises ConvergenceError.
MllResult mll_detailed(const GpModel& model, const Matrix& x, const Vector& y);
double mll(const GpModel& model, const Matrix& x, const Vector& y);

inline constexpr double kGradientStep = 1e-4;

// Central finite differences of mll over pack_log_hyperparameters(). Both
// sides of every difference use the model's seeds, so estimator noise in
// skip mode is common to both and cancels.
Vector mll_gradient(const GpModel& model, const Matrix& x, const Vector& y,
                    double step = kGradientStep);

struct OptimizerSettings {
  double learning_rate = 0.1;
  Index steps = 100;
  // Replaces the model's probe seed for the whole run when set.
  std::optional<std::uint64_t> seed;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct FitTrace {
  // mll at theta_0 .. theta_k. A failed evaluation ends the run and is
  // recorded as -inf.
  std::vector<double> mll;
  std::vector<Vector> log_hyperparameters;
  Index best_index = 0;
};

struct FitResult {
  GpModel model;  // best-seen hyperparameters
  double best_mll = 0.0;
  double initial_mll = 0.0;
  FitTrace trace;
};

// ADAM ascent on the log hyperparameters. Throws InitializationError when the
// mll at the starting point is not finite.
FitResult fit(const GpModel& model, const Matrix& x, const Vector& y,
              const OptimizerSettings& optimizer);

struct Prediction {
  Vector mean;
  Vector variance;
};

// (done, total) after every batch of test points.
using ProgressCallback = std::function<void(Index, Index)>;

inline constexpr Index kPredictionBatch = 500;

// Training data with the solve alpha = (K + s2 I)^-1 (y - mu) cached.
class TrainedPosterior {
 public:
  // `coverage` (rows are points) extends the SKI grids in skip mode so that
  // those points are interpolable as well.
  static TrainedPosterior build(GpModel model, Matrix x, Vector y,
                                const Matrix* coverage = nullptr);

  const GpModel& model() const { return model_; }
  const Matrix& inputs() const { return x_; }
  const Vector& targets() const { return y_; }
  const Vector& alpha() const { return alpha_; }
  double noise() const { return noise_; }
  // ||(K + s2 I) alpha - (y - mu)|| / ||y - mu|| at construction.
  double solve_residual() const { return solve_residual_; }
  Index cg_iterations() const { return cg_iterations_; }

  // True when every coordinate of every row is inside the SKI grids (always
  // true in exact mode).
  bool covers(const Matrix& xstar) const;

  Prediction predict(const Matrix& xstar,
                     const ProgressCallback& progress = {}) const;

 private:
  struct SkipState;

  TrainedPosterior() = default;
  Vector cross_covariance(const Vector& point) const;

  GpModel model_;
  Matrix x_;
  Vector y_;
  Vector alpha_;
  double noise_ = 0.0;
  double solve_residual_ = 0.0;
  Index cg_iterations_ = 0;
  std::shared_ptr<const Eigen::LLT<Matrix>> cholesky_;
  std::shared_ptr<const SkipState> skip_;
};

// Predictive mean and latent-function variance (clamped at 0). In skip mode,
// test points outside the SKI grids cause a rebuild over train and test
// inputs when the model allows it, OutOfRangeError otherwise.
Prediction predict(const TrainedPosterior& posterior, const Matrix& xstar,
                   const ProgressCallback& progress = {});

}  // namespace skipgp
