#include "skipgp/gp.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "skipgp/krylov.hpp"
#include "skipgp/random.hpp"

namespace skipgp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double variance_of(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size());
}

void check_data(const Matrix& x, const Vector& y) {
  if (x.rows() < 1) throw InvalidArgument("GP needs at least one observation");
  require_size(y.size(), x.rows(), "GP targets");
  if (!x.allFinite() || !y.allFinite()) {
    throw InvalidArgument("GP inputs and targets must be finite");
  }
}

// SKI components of every input dimension plus their cached product
// decomposition.
struct SkipKernel {
  std::vector<std::shared_ptr<const SkiOperator>> components;
  std::shared_ptr<const SkipTree> tree;
  std::uint64_t leaf_applies = 0;
};

SkipKernel build_skip_kernel(const GpModel& model, const Matrix& x,
                             const Matrix* coverage) {
  const ProductKernelSpec product = decompose_product(model.kernel, x.cols());
  SkipKernel kernel;
  std::vector<OperatorPtr> counted;
  std::vector<std::shared_ptr<const CountingOperator>> counters;
  for (Index c = 0; c < x.cols(); ++c) {
    const Vector column = x.col(c);
    Vector grid_values = column;
    if (coverage != nullptr && coverage->rows() > 0) {
      grid_values.resize(column.size() + coverage->rows());
      grid_values << column, coverage->col(c);
    }
    const Grid1D grid = build_grid(
        std::span<const double>(grid_values.data(), grid_values.size()),
        model.skip.grid_size);
    auto op = std::make_shared<const SkiOperator>(
        product.components[c],
        std::span<const double>(column.data(), column.size()), grid);
    kernel.components.push_back(op);
    auto counter = std::make_shared<const CountingOperator>(op);
    counters.push_back(counter);
    counted.push_back(counter);
  }
  kernel.tree = std::make_shared<const SkipTree>(
      skip_decompose(counted, model.skip.rank, model.skip.probe_seed));
  for (const auto& c : counters) kernel.leaf_applies += c->applies();
  return kernel;
}

// Stream ids separating the SLQ probes from the decomposition probes.
constexpr std::uint64_t kSlqStream = 0x51c0;

}  // namespace

std::string to_string(InferenceMode mode) {
  return mode == InferenceMode::kSkip ? "skip" : "exact";
}

InferenceMode inference_mode_from_string(const std::string& name) {
  if (name == "exact" || name == "exact_dense") return InferenceMode::kExactDense;
  if (name == "skip") return InferenceMode::kSkip;
  throw InvalidArgument("unknown inference mode '" + name + "'");
}

GpModel initialize_model(const Matrix& x, const Vector& y, KernelFamily family,
                         bool ard, InferenceMode mode) {
  check_data(x, y);
  const Index d = x.cols();
  Vector stds(d);
  for (Index c = 0; c < d; ++c) {
    const double s = std::sqrt(variance_of(x.col(c)));
    stds[c] = s > 0.0 ? s : 1.0;
  }
  double var_y = variance_of(y);
  if (!(var_y > 0.0)) var_y = 1.0;

  GpModel model;
  model.kernel.family = family;
  model.kernel.lengthscales =
      ard ? stds : Vector::Constant(1, stds.mean());
  model.kernel.outputscale = var_y;
  model.noise_variance = 0.1 * var_y;
  model.constant_mean = y.mean();
  model.mode = mode;
  model.kernel.validate();
  return model;
}

double effective_noise(const GpModel& model, const Vector& y) {
  const double var_y = variance_of(y);
  const double floor = var_y > 0.0 ? 1e-6 * var_y : 1e-6;
  return std::max(model.noise_variance, floor);
}

Vector pack_log_hyperparameters(const GpModel& model) {
  const Index l = model.kernel.lengthscales.size();
  Vector theta(l + 2);
  theta.head(l) = model.kernel.lengthscales.array().log();
  theta[l] = std::log(model.kernel.outputscale);
  theta[l + 1] = std::log(model.noise_variance);
  return theta;
}

GpModel unpack_log_hyperparameters(const GpModel& base, const Vector& theta) {
  const Index l = base.kernel.lengthscales.size();
  require_size(theta.size(), l + 2, "log hyperparameter vector");
  GpModel model = base;
  model.kernel.lengthscales = theta.head(l).array().exp();
  model.kernel.outputscale = std::exp(theta[l]);
  model.noise_variance = std::exp(theta[l + 1]);
  return model;
}

MllResult mll_detailed(const GpModel& model, const Matrix& x, const Vector& y) {
  check_data(x, y);
  model.kernel.validate();
  const auto start = Clock::now();
  const Index n = x.rows();
  const double noise = effective_noise(model, y);
  const Vector centered = y.array() - model.constant_mean;
  MllResult result;

  if (model.mode == InferenceMode::kExactDense) {
    auto phase = Clock::now();
    Matrix k = kernel_matrix(model.kernel, x, x);
    k.diagonal().array() += noise;
    const Eigen::LLT<Matrix> llt(k);
    if (llt.info() != Eigen::Success) {
      throw NumericalBreakdown("mll: Cholesky factorization failed", 0);
    }
    result.times.decompose_seconds = seconds_since(phase);
    phase = Clock::now();
    const Vector alpha = llt.solve(centered);
    result.quadratic_term = centered.dot(alpha);
    result.times.solve_seconds = seconds_since(phase);
    phase = Clock::now();
    result.logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    result.times.logdet_seconds = seconds_since(phase);
  } else {
    auto phase = Clock::now();
    const SkipKernel kernel = build_skip_kernel(model, x, nullptr);
    result.leaf_applies = kernel.leaf_applies;
    const auto shifted = std::make_shared<const ShiftedOperator>(
        std::make_shared<const SkipOperator>(kernel.tree), noise);
    const CountingOperator counted(shifted);
    result.times.decompose_seconds = seconds_since(phase);

    phase = Clock::now();
    const CgResult cg = cg_solve(
        counted, centered,
        CgOptions{model.skip.cg_tolerance, model.skip.max_cg_iterations});
    result.cg_iterations = cg.iterations;
    result.cg_residual = cg.relative_residual;
    if (!cg.converged) {
      throw ConvergenceError("mll: CG did not converge", cg.relative_residual);
    }
    result.quadratic_term = centered.dot(cg.solution);
    result.times.solve_seconds = seconds_since(phase);

    phase = Clock::now();
    const SlqEstimate slq =
        slq_logdet(counted, model.skip.num_probes, model.skip.rank,
                   derive_seed(model.skip.probe_seed, kSlqStream));
    result.logdet = slq.logdet;
    result.clamped_ritz_values = slq.clamped_ritz_values;
    result.times.logdet_seconds = seconds_since(phase);
    result.kernel_applies = counted.applies();
  }

  result.value = -0.5 * result.quadratic_term - 0.5 * result.logdet -
                 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  result.times.total_seconds = seconds_since(start);
  return result;
}

double mll(const GpModel& model, const Matrix& x, const Vector& y) {
  return mll_detailed(model, x, y).value;
}

Vector mll_gradient(const GpModel& model, const Matrix& x, const Vector& y,
                    double step) {
  if (!(step > 0.0)) throw InvalidArgument("mll_gradient: step <= 0");
  const Vector theta = pack_log_hyperparameters(model);
  Vector gradient(theta.size());
  for (Index i = 0; i < theta.size(); ++i) {
    Vector plus = theta;
    Vector minus = theta;
    plus[i] += step;
    minus[i] -= step;
    const double up = mll(unpack_log_hyperparameters(model, plus), x, y);
    const double down = mll(unpack_log_hyperparameters(model, minus), x, y);
    gradient[i] = (up - down) / (2.0 * step);
  }
  return gradient;
}

FitResult fit(const GpModel& model, const Matrix& x, const Vector& y,
              const OptimizerSettings& optimizer) {
  if (optimizer.steps < 1) throw InvalidArgument("fit: steps must be >= 1");
  if (!(optimizer.learning_rate > 0.0)) {
    throw InvalidArgument("fit: learning rate must be positive");
  }
  GpModel base = model;
  if (optimizer.seed) base.skip.probe_seed = *optimizer.seed;

  FitResult result;
  Vector theta = pack_log_hyperparameters(base);
  double initial = -std::numeric_limits<double>::infinity();
  try {
    initial = mll(base, x, y);
  } catch (const Error& e) {
    throw InitializationError(std::string("fit: mll failed at initialization: ") +
                              e.what());
  }
  if (!std::isfinite(initial)) {
    throw InitializationError("fit: non-finite mll at initialization");
  }
  result.initial_mll = initial;
  result.trace.mll.push_back(initial);
  result.trace.log_hyperparameters.push_back(theta);

  Vector first_moment = Vector::Zero(theta.size());
  Vector second_moment = Vector::Zero(theta.size());
  for (Index step = 1; step <= optimizer.steps; ++step) {
    double value = -std::numeric_limits<double>::infinity();
    try {
      const Vector gradient = mll_gradient(unpack_log_hyperparameters(base, theta), x, y);
      first_moment = optimizer.beta1 * first_moment + (1.0 - optimizer.beta1) * gradient;
      second_moment = optimizer.beta2 * second_moment +
                      (1.0 - optimizer.beta2) * gradient.cwiseAbs2();
      const double c1 = 1.0 - std::pow(optimizer.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(optimizer.beta2, static_cast<double>(step));
      // Ascent: mll is maximized.
      theta.array() += optimizer.learning_rate * (first_moment.array() / c1) /
                       ((second_moment.array() / c2).sqrt() + optimizer.epsilon);
      value = mll(unpack_log_hyperparameters(base, theta), x, y);
    } catch (const Error&) {
      value = -std::numeric_limits<double>::infinity();
    }
    result.trace.mll.push_back(value);
    result.trace.log_hyperparameters.push_back(theta);
    if (!std::isfinite(value)) break;
  }

  Index best = 0;
  for (Index i = 1; i < static_cast<Index>(result.trace.mll.size()); ++i) {
    if (result.trace.mll[i] > result.trace.mll[best]) best = i;
  }
  result.trace.best_index = best;
  result.best_mll = result.trace.mll[best];
  result.model = unpack_log_hyperparameters(base, result.trace.log_hyperparameters[best]);
  return result;
}

// ---------------------------------------------------------------------------

struct TrainedPosterior::SkipState {
  SkipKernel kernel;
  std::shared_ptr<const LinearOperator> shifted;
};

TrainedPosterior TrainedPosterior::build(GpModel model, Matrix x, Vector y,
                                         const Matrix* coverage) {
  check_data(x, y);
  model.kernel.validate();
  TrainedPosterior post;
  post.noise_ = effective_noise(model, y);
  const Vector centered = y.array() - model.constant_mean;

  if (model.mode == InferenceMode::kExactDense) {
    Matrix k = kernel_matrix(model.kernel, x, x);
    k.diagonal().array() += post.noise_;
    auto llt = std::make_shared<Eigen::LLT<Matrix>>(k);
    if (llt->info() != Eigen::Success) {
      throw NumericalBreakdown("posterior: Cholesky factorization failed", 0);
    }
    post.alpha_ = llt->solve(centered);
    const double denom = centered.norm();
    post.solve_residual_ =
        denom > 0.0 ? (k * post.alpha_ - centered).norm() / denom : 0.0;
    post.cholesky_ = std::move(llt);
  } else {
    auto state = std::make_shared<SkipState>();
    state->kernel = build_skip_kernel(model, x, coverage);
    state->shifted = std::make_shared<const ShiftedOperator>(
        std::make_shared<const SkipOperator>(state->kernel.tree), post.noise_);
    const CgResult cg = cg_solve(
        *state->shifted, centered,
        CgOptions{model.skip.cg_tolerance, model.skip.max_cg_iterations});
    if (!cg.converged) {
      throw ConvergenceError("posterior: CG did not converge", cg.relative_residual);
    }
    post.alpha_ = cg.solution;
    post.solve_residual_ = cg.relative_residual;
    post.cg_iterations_ = cg.iterations;
    post.skip_ = std::move(state);
  }
  post.model_ = std::move(model);
  post.x_ = std::move(x);
  post.y_ = std::move(y);
  return post;
}

bool TrainedPosterior::covers(const Matrix& xstar) const {
  if (!skip_) return true;
  require_size(xstar.cols(), x_.cols(), "prediction input dimension");
  for (Index c = 0; c < xstar.cols(); ++c) {
    const Grid1D& grid = skip_->kernel.components[c]->approximation().grid;
    for (Index i = 0; i < xstar.rows(); ++i) {
      if (!grid.interpolable(xstar(i, c))) return false;
    }
  }
  return true;
}

Vector TrainedPosterior::cross_covariance(const Vector& point) const {
  if (!skip_) {
    return kernel_matrix(model_.kernel, point.transpose(), x_).row(0).transpose();
  }
  Vector out = Vector::Ones(x_.rows());
  for (Index c = 0; c < point.size(); ++c) {
    out.array() *= skip_->kernel.components[c]->cross_covariance(point[c]).array();
  }
  return out;
}

Prediction TrainedPosterior::predict(const Matrix& xstar,
                                     const ProgressCallback& progress) const {
  require_size(xstar.cols(), x_.cols(), "prediction input dimension");
  if (!covers(xstar)) {
    if (!model_.skip.rebuild_grid) {
      for (Index c = 0; c < xstar.cols(); ++c) {
        const Grid1D& grid = skip_->kernel.components[c]->approximation().grid;
        for (Index i = 0; i < xstar.rows(); ++i) {
          if (!grid.interpolable(xstar(i, c))) {
            throw OutOfRangeError("test point outside the SKI grid", i);
          }
        }
      }
    }
    const TrainedPosterior rebuilt = build(model_, x_, y_, &xstar);
    return rebuilt.predict(xstar, progress);
  }

  const Index k = xstar.rows();
  Prediction out;
  out.mean.resize(k);
  out.variance.resize(k);
  const double prior = model_.kernel.outputscale;

  if (cholesky_) {
    for (Index start = 0; start < k; start += kPredictionBatch) {
      const Index count = std::min(kPredictionBatch, k - start);
      const Matrix cross = kernel_matrix(model_.kernel, xstar.middleRows(start, count), x_);
      out.mean.segment(start, count) =
          (cross * alpha_).array() + model_.constant_mean;
      const Matrix v = cholesky_->matrixL().solve(cross.transpose());
      out.variance.segment(start, count) =
          (prior - v.colwise().squaredNorm().transpose().array()).max(0.0);
      if (progress) progress(start + count, k);
    }
    return out;
  }

  const CgOptions options{model_.skip.cg_tolerance, model_.skip.max_cg_iterations};
  for (Index start = 0; start < k; start += kPredictionBatch) {
    const Index count = std::min(kPredictionBatch, k - start);
    for (Index i = start; i < start + count; ++i) {
      const Vector cross = cross_covariance(xstar.row(i).transpose());
      out.mean[i] = model_.constant_mean + cross.dot(alpha_);
      const CgResult cg = cg_solve(*skip_->shifted, cross, options);
      out.variance[i] = std::max(0.0, prior - cross.dot(cg.solution));
    }
    if (progress) progress(start + count, k);
  }
  return out;
}

Prediction predict(const TrainedPosterior& posterior, const Matrix& xstar,
                   const ProgressCallback& progress) {
  return posterior.predict(xstar, progress);
}

}  // namespace skipgp
