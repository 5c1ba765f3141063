#include "skipgp/multitask.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <tuple>

#include "skipgp/krylov.hpp"
#include "skipgp/random.hpp"
#include "skipgp/ski.hpp"

namespace skipgp {

void TaskAssignment::validate() const {
  if (num_tasks < 1) throw DimensionError("task assignment needs >= 1 task");
  for (std::size_t i = 0; i < task_of.size(); ++i) {
    if (task_of[i] < 0 || task_of[i] >= num_tasks) {
      throw DimensionError("observation " + std::to_string(i) + " has task index " +
                           std::to_string(task_of[i]) + " outside [0, " +
                           std::to_string(num_tasks) + ")");
    }
  }
}

void Coregionalization::validate() const {
  if (b.rows() != kappa.size()) {
    throw DimensionError("coregionalization: B rows differ from kappa length");
  }
  if ((kappa.array() < 0.0).any()) {
    throw InvalidArgument("coregionalization: kappa must be nonnegative");
  }
}

Matrix Coregionalization::task_covariance() const {
  Matrix m = b * b.transpose();
  m.diagonal() += kappa;
  return m;
}

Vector task_operator_mvm(const TaskAssignment& assignment,
                         const Coregionalization& coreg, const Vector& v) {
  assignment.validate();
  coreg.validate();
  require_size(coreg.num_tasks(), assignment.num_tasks, "coregionalization tasks");
  require_size(v.size(), assignment.size(), "task_operator_mvm");
  Vector gathered = Vector::Zero(assignment.num_tasks);
  for (Index i = 0; i < v.size(); ++i) gathered[assignment.task_of[i]] += v[i];
  Vector mixed = coreg.kappa.cwiseProduct(gathered);
  if (coreg.rank() > 0) mixed += coreg.b * (coreg.b.transpose() * gathered);
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) out[i] = mixed[assignment.task_of[i]];
  return out;
}

TaskOperator::TaskOperator(TaskAssignment assignment, Coregionalization coreg)
    : assignment_(std::move(assignment)), coreg_(std::move(coreg)) {
  assignment_.validate();
  coreg_.validate();
  require_size(coreg_.num_tasks(), assignment_.num_tasks, "coregionalization tasks");
  if (assignment_.size() == 0) throw DimensionError("TaskOperator over zero observations");
}

std::uint64_t TaskOperator::multiply_count() const {
  const auto s = static_cast<std::uint64_t>(coreg_.num_tasks());
  const auto q = static_cast<std::uint64_t>(coreg_.rank());
  return 2 * s * q + s;
}

Vector TaskOperator::apply_impl(const Vector& v) const {
  return task_operator_mvm(assignment_, coreg_, v);
}

// ---------------------------------------------------------------------------

MultitaskOperator::MultitaskOperator(std::shared_ptr<const LanczosFactor> data_factor,
                                     TaskAssignment assignment, Coregionalization coreg)
    : data_(std::move(data_factor)),
      assignment_(std::move(assignment)),
      coreg_(std::move(coreg)) {
  if (!data_ || data_->rank() == 0) {
    throw DimensionError("MultitaskOperator needs a nonempty data factor");
  }
  assignment_.validate();
  coreg_.validate();
  require_size(assignment_.size(), data_->rows(), "task assignment rows");
  require_size(coreg_.num_tasks(), assignment_.num_tasks, "coregionalization tasks");
}

std::uint64_t MultitaskOperator::multiply_count() const {
  const auto n = static_cast<std::uint64_t>(data_->rows());
  const auto r = static_cast<std::uint64_t>(data_->rank());
  const auto q = static_cast<std::uint64_t>(coreg_.rank());
  const auto s = static_cast<std::uint64_t>(coreg_.num_tasks());
  return 2 * n * r * q + 3 * n * r + s * r * 3;
}

Vector MultitaskOperator::apply_impl(const Vector& v) const {
  const Matrix& q = data_->basis;
  const Matrix t = data_->tridiagonal();
  const Index n = q.rows();
  const Index r = q.cols();
  const auto& task = assignment_.task_of;
  Vector out = Vector::Zero(n);

  if (coreg_.rank() > 0) {
    Matrix weighted_b(n, coreg_.rank());
    for (Index j = 0; j < n; ++j) weighted_b.row(j) = v[j] * coreg_.b.row(task[j]);
    const Matrix core = t * (q.transpose() * weighted_b);  // r x q
    const Matrix projected = q * core;                      // n x q
    for (Index i = 0; i < n; ++i) out[i] = projected.row(i).dot(coreg_.b.row(task[i]));
  }

  Matrix per_task = Matrix::Zero(assignment_.num_tasks, r);
  for (Index j = 0; j < n; ++j) per_task.row(task[j]) += v[j] * q.row(j);
  const Matrix mixed = per_task * t;  // row t: (T sum_j v_j q_j^T)^T
  for (Index i = 0; i < n; ++i) {
    const double k = coreg_.kappa[task[i]];
    if (k != 0.0) out[i] += k * q.row(i).dot(mixed.row(task[i]));
  }
  return out;
}

std::shared_ptr<const MultitaskOperator> multitask_operator(
    const LinearOperator& data_kernel, const TaskAssignment& assignment,
    const Coregionalization& coreg, Index rank, std::uint64_t seed) {
  const Index n = data_kernel.size();
  auto factor = std::make_shared<const LanczosFactor>(lanczos_decompose(
      data_kernel, unit_normal_probe(n, seed), std::min(rank, n)));
  return std::make_shared<const MultitaskOperator>(std::move(factor), assignment, coreg);
}

// ---------------------------------------------------------------------------

void MultitaskData::validate() const {
  if (x.size() != y.size() || static_cast<Index>(task.size()) != x.size()) {
    throw DimensionError("multitask data: x, y and task lengths differ");
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw InvalidArgument("multitask data must be finite");
  }
  TaskAssignment{task, num_tasks}.validate();
}

std::vector<Index> MultitaskData::rows_of_task(Index t) const {
  std::vector<Index> rows;
  for (Index i = 0; i < size(); ++i) {
    if (task[i] == t) rows.push_back(i);
  }
  return rows;
}

MultitaskData MultitaskData::subset_tasks(const std::vector<Index>& tasks) const {
  std::vector<Index> remap(static_cast<std::size_t>(num_tasks), -1);
  for (std::size_t k = 0; k < tasks.size(); ++k) remap[tasks[k]] = static_cast<Index>(k);
  std::vector<Index> rows;
  for (Index i = 0; i < size(); ++i) {
    if (remap[task[i]] >= 0) rows.push_back(i);
  }
  MultitaskData out;
  out.num_tasks = static_cast<Index>(tasks.size());
  out.x.resize(static_cast<Index>(rows.size()));
  out.y.resize(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.x[k] = x[rows[k]];
    out.y[k] = y[rows[k]];
    out.task.push_back(remap[task[rows[k]]]);
  }
  return out;
}

MultitaskData MultitaskData::with_new_task(const Vector& x_new,
                                           const Vector& y_new) const {
  require_size(y_new.size(), x_new.size(), "new task observations");
  MultitaskData out;
  out.num_tasks = num_tasks + 1;
  out.x.resize(size() + x_new.size());
  out.y.resize(size() + y_new.size());
  out.x << x, x_new;
  out.y << y, y_new;
  out.task = task;
  out.task.insert(out.task.end(), static_cast<std::size_t>(x_new.size()), num_tasks);
  return out;
}

void ClusterHyperparameters::validate() const {
  cluster_kernel.validate();
  individual_kernel.validate();
  if (cluster_kernel.is_ard() || individual_kernel.is_ard()) {
    throw InvalidArgument("cluster kernels act on one-dimensional inputs");
  }
  if (!(noise_variance > 0.0)) throw InvalidArgument("noise variance must be positive");
}

ClusterHyperparameters default_cluster_hyperparameters(const MultitaskData& data) {
  data.validate();
  const auto var = [](const Vector& v) {
    if (v.size() < 2) return 1.0;
    const double s = (v.array() - v.mean()).square().mean();
    return s > 0.0 ? s : 1.0;
  };
  const double var_y = var(data.y);
  const double std_x = std::sqrt(var(data.x));
  ClusterHyperparameters h;
  h.cluster_kernel = KernelSpec::matern52(Vector::Constant(1, std_x), 0.5 * var_y);
  h.individual_kernel = KernelSpec::matern52(Vector::Constant(1, std_x), 0.5 * var_y);
  h.noise_variance = 0.1 * var_y;
  h.constant_mean = data.size() > 0 ? data.y.mean() : 0.0;
  return h;
}

Vector pack_cluster_hyperparameters(const ClusterHyperparameters& h) {
  Vector theta(5);
  theta << std::log(h.cluster_kernel.lengthscales[0]),
      std::log(h.cluster_kernel.outputscale),
      std::log(h.individual_kernel.lengthscales[0]),
      std::log(h.individual_kernel.outputscale), std::log(h.noise_variance);
  return theta;
}

ClusterHyperparameters unpack_cluster_hyperparameters(
    const ClusterHyperparameters& base, const Vector& theta) {
  require_size(theta.size(), 5, "cluster hyperparameter vector");
  ClusterHyperparameters h = base;
  h.cluster_kernel.lengthscales[0] = std::exp(theta[0]);
  h.cluster_kernel.outputscale = std::exp(theta[1]);
  h.individual_kernel.lengthscales[0] = std::exp(theta[2]);
  h.individual_kernel.outputscale = std::exp(theta[3]);
  h.noise_variance = std::exp(theta[4]);
  return h;
}

void ClusterState::validate(Index num_tasks) const {
  if (num_clusters < 1) throw InvalidArgument("cluster count must be >= 1");
  if (static_cast<Index>(lambda.size()) != num_tasks) {
    throw DimensionError("cluster state: one assignment per task required");
  }
  for (Index a : lambda) {
    if (a < 0 || a >= num_clusters) {
      throw DimensionError("cluster assignment outside [0, c)");
    }
  }
}

ClusterState initial_cluster_state(const MultitaskData& data, Index num_clusters,
                                   std::uint64_t seed) {
  if (num_clusters < 1) throw InvalidArgument("cluster count must be >= 1");
  ClusterState state;
  state.num_clusters = num_clusters;
  state.hyper = default_cluster_hyperparameters(data);
  state.rng_seed = seed;
  std::mt19937_64 rng(derive_seed(seed, 0xc1));
  std::uniform_int_distribution<Index> pick(0, num_clusters - 1);
  state.lambda.resize(static_cast<std::size_t>(data.num_tasks));
  for (auto& a : state.lambda) a = pick(rng);
  return state;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178032973640562;

// Covariance between observation sets under one cluster assignment.
double pair_covariance(const ClusterHyperparameters& h, double xi, double xj,
                       bool same_cluster, bool same_task) {
  double k = 0.0;
  if (same_cluster) k += h.cluster_kernel.eval_1d(xi, xj);
  if (same_task) k += h.individual_kernel.eval_1d(xi, xj);
  return k;
}

double gaussian_mll(const Matrix& k_hat, const Vector& centered) {
  const Eigen::LLT<Matrix> llt(k_hat);
  if (llt.info() != Eigen::Success) {
    throw NumericalBreakdown("cluster mll: Cholesky factorization failed", 0);
  }
  const Vector alpha = llt.solve(centered);
  const double logdet =
      2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * centered.dot(alpha) - 0.5 * logdet -
         kHalfLog2Pi * static_cast<double>(centered.size());
}

std::vector<Index> cluster_of_observation(const MultitaskData& data,
                                          const std::vector<Index>& lambda) {
  std::vector<Index> out(static_cast<std::size_t>(data.size()));
  for (Index i = 0; i < data.size(); ++i) out[i] = lambda[data.task[i]];
  return out;
}

Vector softmax(const Vector& logits) {
  const double peak = logits.maxCoeff();
  Vector w = (logits.array() - peak).exp();
  return w / w.sum();
}

}  // namespace

Matrix cluster_covariance_dense(const MultitaskData& data,
                                const std::vector<Index>& lambda,
                                const ClusterHyperparameters& hyper) {
  data.validate();
  const Index n = data.size();
  if (n > kMaxDenseSize) throw InvalidArgument("cluster covariance too large to materialize");
  const auto cluster = cluster_of_observation(data, lambda);
  Matrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      k(i, j) = pair_covariance(hyper, data.x[i], data.x[j], cluster[i] == cluster[j],
                                data.task[i] == data.task[j]);
    }
  }
  return k;
}

struct ClusterMllEvaluator::FactorCache {
  Vector key;
  std::shared_ptr<const LanczosFactor> cluster_factor;
  std::shared_ptr<const LanczosFactor> individual_factor;
};

ClusterMllEvaluator::ClusterMllEvaluator(const MultitaskData& data,
                                         ClusterInference settings)
    : data_(data), settings_(settings), cache_(std::make_shared<FactorCache>()) {
  data_.validate();
  if (data_.size() == 0) throw InvalidArgument("cluster mll over zero observations");
}

double ClusterMllEvaluator::operator()(const std::vector<Index>& lambda,
                                       Index num_clusters,
                                       const ClusterHyperparameters& hyper,
                                       std::uint64_t seed) {
  ++evaluations_;
  hyper.validate();
  if (static_cast<Index>(lambda.size()) != data_.num_tasks) {
    throw DimensionError("cluster mll: one assignment per task required");
  }
  for (Index a : lambda) {
    if (a < 0 || a >= num_clusters) throw DimensionError("cluster assignment outside [0, c)");
  }
  return settings_.mode == InferenceMode::kExactDense
             ? exact(lambda, num_clusters, hyper)
             : skip(lambda, num_clusters, hyper, seed);
}

double ClusterMllEvaluator::exact(const std::vector<Index>& lambda, Index num_clusters,
                                  const ClusterHyperparameters& hyper) const {
  const auto cluster = cluster_of_observation(data_, lambda);
  double total = 0.0;
  for (Index a = 0; a < num_clusters; ++a) {
    std::vector<Index> rows;
    for (Index i = 0; i < data_.size(); ++i) {
      if (cluster[i] == a) rows.push_back(i);
    }
    if (rows.empty()) continue;
    const auto m = static_cast<Index>(rows.size());
    Matrix k(m, m);
    Vector centered(m);
    for (Index p = 0; p < m; ++p) {
      centered[p] = data_.y[rows[p]] - hyper.constant_mean;
      for (Index q = 0; q < m; ++q) {
        k(p, q) = pair_covariance(hyper, data_.x[rows[p]], data_.x[rows[q]], true,
                                  data_.task[rows[p]] == data_.task[rows[q]]);
      }
    }
    k.diagonal().array() += hyper.noise_variance;
    total += gaussian_mll(k, centered);
  }
  return total;
}

double ClusterMllEvaluator::skip(const std::vector<Index>& lambda, Index num_clusters,
                                 const ClusterHyperparameters& hyper,
                                 std::uint64_t seed) {
  const Index n = data_.size();
  Vector key(6);
  key << hyper.cluster_kernel.lengthscales[0], hyper.cluster_kernel.outputscale,
      hyper.individual_kernel.lengthscales[0], hyper.individual_kernel.outputscale,
      static_cast<double>(seed), static_cast<double>(hyper.cluster_kernel.family);
  if (!cache_->cluster_factor || cache_->key != key) {
    const std::span<const double> xs(data_.x.data(), static_cast<std::size_t>(n));
    const Index rank = std::min(settings_.rank, n);
    const auto cluster_ski = ski_operator(hyper.cluster_kernel, xs, settings_.grid_size);
    const auto indiv_ski = ski_operator(hyper.individual_kernel, xs, settings_.grid_size);
    cache_->cluster_factor = std::make_shared<const LanczosFactor>(lanczos_decompose(
        *cluster_ski, unit_normal_probe(n, derive_seed(seed, 1)), rank));
    cache_->individual_factor = std::make_shared<const LanczosFactor>(lanczos_decompose(
        *indiv_ski, unit_normal_probe(n, derive_seed(seed, 2)), rank));
    cache_->key = key;
  }

  TaskAssignment clusters{cluster_of_observation(data_, lambda), num_clusters};
  TaskAssignment tasks{data_.task, data_.num_tasks};
  const Coregionalization cluster_indicator{Matrix(num_clusters, 0),
                                            Vector::Ones(num_clusters)};
  const Coregionalization task_indicator{Matrix(data_.num_tasks, 0),
                                         Vector::Ones(data_.num_tasks)};
  const auto kernel = std::make_shared<const SumOperator>(std::vector<OperatorPtr>{
      std::make_shared<const MultitaskOperator>(cache_->cluster_factor, clusters,
                                                cluster_indicator),
      std::make_shared<const MultitaskOperator>(cache_->individual_factor, tasks,
                                                task_indicator)});
  const ShiftedOperator k_hat(kernel, hyper.noise_variance);

  const Vector centered = data_.y.array() - hyper.constant_mean;
  const CgResult cg = cg_solve(k_hat, centered, CgOptions{settings_.cg_tolerance, 0});
  if (!cg.converged) {
    throw ConvergenceError("cluster mll: CG did not converge", cg.relative_residual);
  }
  const SlqEstimate slq =
      slq_logdet(k_hat, settings_.num_probes, settings_.rank, derive_seed(seed, 3));
  return -0.5 * centered.dot(cg.solution) - 0.5 * slq.logdet -
         kHalfLog2Pi * static_cast<double>(n);
}

double cluster_kernel_mll(const std::vector<Index>& lambda, Index num_clusters,
                          const ClusterHyperparameters& hyper,
                          const MultitaskData& data,
                          const ClusterInference& settings, std::uint64_t seed) {
  ClusterMllEvaluator evaluator(data, settings);
  return evaluator(lambda, num_clusters, hyper, seed);
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kSweepRngStream = 0;
constexpr std::uint64_t kSweepProbeStream = 1;

std::uint64_t sweep_seed(const ClusterState& state, std::uint64_t stream) {
  return derive_seed(state.rng_seed,
                     2 * static_cast<std::uint64_t>(state.sweeps_completed) + stream);
}

}  // namespace

GibbsSweepResult gibbs_sweep(const ClusterState& state, ClusterMllEvaluator& evaluator) {
  const MultitaskData& data = evaluator.data();
  state.validate(data.num_tasks);
  const Index c = state.num_clusters;
  const Index s = data.num_tasks;
  const std::uint64_t probe_seed = sweep_seed(state, kSweepProbeStream);
  std::mt19937_64 rng(sweep_seed(state, kSweepRngStream));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double log_prior = -std::log(static_cast<double>(c));
  const std::uint64_t before = evaluator.evaluations();

  GibbsSweepResult result;
  result.state = state;
  result.posterior_weights.resize(s, c);
  std::vector<Index>& lambda = result.state.lambda;
  for (Index i = 0; i < s; ++i) {
    Vector logits(c);
    Vector mlls(c);
    for (Index a = 0; a < c; ++a) {
      lambda[i] = a;
      mlls[a] = evaluator(lambda, c, state.hyper, probe_seed);
      logits[a] = mlls[a] + log_prior;
    }
    const Vector weights = softmax(logits);
    result.posterior_weights.row(i) = weights.transpose();
    const double u = uniform(rng);
    Index chosen = c - 1;
    double cumulative = 0.0;
    for (Index a = 0; a < c; ++a) {
      cumulative += weights[a];
      if (u < cumulative) {
        chosen = a;
        break;
      }
    }
    lambda[i] = chosen;
    result.mll = mlls[chosen];
  }
  result.state.sweeps_completed = state.sweeps_completed + 1;
  result.mll_evaluations = evaluator.evaluations() - before;
  return result;
}

ClusterFitResult fit_cluster_model(const MultitaskData& data,
                                   const ClusterFitSettings& settings,
                                   std::optional<ClusterState> initial) {
  if (settings.sweeps < 1) throw InvalidArgument("cluster fit needs >= 1 sweep");
  ClusterState state = initial ? *initial
                               : initial_cluster_state(data, settings.num_clusters,
                                                       settings.seed);
  state.validate(data.num_tasks);
  ClusterMllEvaluator evaluator(data, settings.inference);

  ClusterFitResult result;
  result.membership_frequency = Matrix::Zero(data.num_tasks, state.num_clusters);
  Vector theta = pack_cluster_hyperparameters(state.hyper);
  Vector first_moment = Vector::Zero(theta.size());
  Vector second_moment = Vector::Zero(theta.size());
  Index adam_step = 0;
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEpsilon = 1e-8;

  for (Index sweep = 0; sweep < settings.sweeps; ++sweep) {
    const std::uint64_t probe_seed = sweep_seed(state, kSweepProbeStream);
    for (Index k = 0; k < settings.adam_steps_per_sweep; ++k) {
      const auto objective = [&](const Vector& t) {
        return evaluator(state.lambda, state.num_clusters,
                         unpack_cluster_hyperparameters(state.hyper, t), probe_seed);
      };
      try {
        Vector gradient(theta.size());
        for (Index p = 0; p < theta.size(); ++p) {
          Vector plus = theta;
          Vector minus = theta;
          plus[p] += kGradientStep;
          minus[p] -= kGradientStep;
          gradient[p] = (objective(plus) - objective(minus)) / (2.0 * kGradientStep);
        }
        ++adam_step;
        first_moment = kBeta1 * first_moment + (1.0 - kBeta1) * gradient;
        second_moment = kBeta2 * second_moment + (1.0 - kBeta2) * gradient.cwiseAbs2();
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_step));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_step));
        theta.array() += settings.learning_rate * (first_moment.array() / c1) /
                         ((second_moment.array() / c2).sqrt() + kEpsilon);
        state.hyper = unpack_cluster_hyperparameters(state.hyper, theta);
      } catch (const Error&) {
        // Keep the last hyperparameters that evaluated cleanly.
        theta = pack_cluster_hyperparameters(state.hyper);
        break;
      }
    }

    GibbsSweepResult swept = gibbs_sweep(state, evaluator);
    state = std::move(swept.state);
    result.trace.push_back({state.sweeps_completed, state.lambda, swept.mll});
    if (sweep >= settings.burn_in) {
      for (Index t = 0; t < data.num_tasks; ++t) {
        result.membership_frequency(t, state.lambda[t]) += 1.0;
      }
    }
  }
  const double kept = static_cast<double>(std::max<Index>(settings.sweeps - settings.burn_in, 0));
  if (kept > 0.0) result.membership_frequency /= kept;
  result.state = std::move(state);
  result.mll_evaluations = evaluator.evaluations();
  return result;
}

// ---------------------------------------------------------------------------

TaskPrediction predict_task(const ClusterState& state, const MultitaskData& data,
                            const Vector& x_new, const Vector& y_new,
                            const Vector& xstar, const ClusterInference& settings,
                            std::uint64_t seed) {
  state.validate(data.num_tasks);
  require_size(y_new.size(), x_new.size(), "new task observations");
  const Index c = state.num_clusters;
  const ClusterHyperparameters& h = state.hyper;

  TaskPrediction out;
  out.membership = Vector::Constant(c, 1.0 / static_cast<double>(c));
  if (x_new.size() > 0) {
    const MultitaskData augmented = data.with_new_task(x_new, y_new);
    ClusterMllEvaluator evaluator(augmented, settings);
    std::vector<Index> lambda = state.lambda;
    lambda.push_back(0);
    Vector logits(c);
    for (Index a = 0; a < c; ++a) {
      lambda.back() = a;
      logits[a] = evaluator(lambda, c, h, seed);
    }
    out.membership = softmax(logits);
  }

  const Index k = xstar.size();
  Vector mixture_mean = Vector::Zero(k);
  Vector mixture_second = Vector::Zero(k);
  const double prior = h.cluster_kernel.outputscale + h.individual_kernel.outputscale;
  for (Index a = 0; a < c; ++a) {
    // Observations that covary with the new task under cluster a: every
    // observation of a task in cluster a, plus the new task's own.
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<Index> owner;  // task id, -1 for the new task
    for (Index i = 0; i < data.size(); ++i) {
      if (state.lambda[data.task[i]] == a) {
        xs.push_back(data.x[i]);
        ys.push_back(data.y[i]);
        owner.push_back(data.task[i]);
      }
    }
    for (Index i = 0; i < x_new.size(); ++i) {
      xs.push_back(x_new[i]);
      ys.push_back(y_new[i]);
      owner.push_back(-1);
    }
    Vector mean = Vector::Constant(k, h.constant_mean);
    Vector var = Vector::Constant(k, prior);
    const auto m = static_cast<Index>(xs.size());
    if (m > 0) {
      Matrix kk(m, m);
      Vector centered(m);
      for (Index p = 0; p < m; ++p) {
        centered[p] = ys[p] - h.constant_mean;
        for (Index q = 0; q < m; ++q) {
          kk(p, q) = pair_covariance(h, xs[p], xs[q], true, owner[p] == owner[q]);
        }
      }
      kk.diagonal().array() += h.noise_variance;
      const Eigen::LLT<Matrix> llt(kk);
      if (llt.info() != Eigen::Success) {
        throw NumericalBreakdown("predict_task: Cholesky factorization failed", 0);
      }
      const Vector alpha = llt.solve(centered);
      Matrix cross(m, k);
      for (Index p = 0; p < m; ++p) {
        for (Index j = 0; j < k; ++j) {
          cross(p, j) = pair_covariance(h, xs[p], xstar[j], true, owner[p] == -1);
        }
      }
      mean.array() += (cross.transpose() * alpha).array();
      const Matrix v = llt.matrixL().solve(cross);
      var = (prior - v.colwise().squaredNorm().transpose().array()).max(0.0);
    }
    mixture_mean += out.membership[a] * mean;
    mixture_second += out.membership[a] * (var.array() + mean.array().square()).matrix();
  }
  out.mean = mixture_mean;
  out.variance = (mixture_second.array() - mixture_mean.array().square()).max(0.0);
  return out;
}

TaskPrediction predict_task(const ClusterState& state, const MultitaskData& data,
                            Index task_id, const Vector& xstar,
                            const ClusterInference& settings, std::uint64_t seed) {
  state.validate(data.num_tasks);
  if (task_id < 0 || task_id >= data.num_tasks) {
    throw DimensionError("predict_task: unknown task id " + std::to_string(task_id));
  }
  std::vector<Index> others;
  for (Index t = 0; t < data.num_tasks; ++t) {
    if (t != task_id) others.push_back(t);
  }
  const std::vector<Index> rows = data.rows_of_task(task_id);
  Vector x_task(static_cast<Index>(rows.size()));
  Vector y_task(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    x_task[k] = data.x[rows[k]];
    y_task[k] = data.y[rows[k]];
  }
  ClusterState reduced = state;
  reduced.lambda.clear();
  for (Index t : others) reduced.lambda.push_back(state.lambda[t]);
  return predict_task(reduced, data.subset_tasks(others), x_task, y_task, xstar,
                      settings, seed);
}

double adjusted_rand_index(const std::vector<Index>& a, const std::vector<Index>& b) {
  if (a.size() != b.size()) throw DimensionError("adjusted_rand_index: length mismatch");
  const auto n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<Index, Index>, double> joint;
  std::map<Index, double> rows;
  std::map<Index, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  const auto pairs = [](double k) { return k * (k - 1.0) / 2.0; };
  double index = 0.0;
  for (const auto& [key, count] : joint) index += pairs(count);
  double row_sum = 0.0;
  for (const auto& [key, count] : rows) row_sum += pairs(count);
  double col_sum = 0.0;
  for (const auto& [key, count] : cols) col_sum += pairs(count);
  const double expected = row_sum * col_sum / pairs(n);
  const double maximum = 0.5 * (row_sum + col_sum);
  if (maximum == expected) return 1.0;
  return (index - expected) / (maximum - expected);
}

SyntheticTasks synthetic_growth_curves(Index num_tasks, Index num_clusters,
                                       Index points_per_task, std::uint64_t seed) {
  if (num_tasks < 1 || num_clusters < 1 || points_per_task < 1) {
    throw InvalidArgument("synthetic_growth_curves: sizes must be positive");
  }
  std::mt19937_64 rng(derive_seed(seed, 0x9a));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticTasks out;
  out.data.num_tasks = num_tasks;
  out.data.x.resize(num_tasks * points_per_task);
  out.data.y.resize(num_tasks * points_per_task);
  for (Index t = 0; t < num_tasks; ++t) {
    // Round-robin keeps every cluster populated.
    const Index cluster = t % num_clusters;
    out.cluster_of_task.push_back(cluster);
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(cluster) /
                         static_cast<double>(num_clusters);
    const double slope = 3.0 * std::cos(angle);
    const double bump = 2.0 * std::sin(angle);
    const double offset = 0.1 * normal(rng);
    const double freq = 1.0 + unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    std::vector<double> xs(static_cast<std::size_t>(points_per_task));
    for (auto& x : xs) x = unit(rng);
    std::sort(xs.begin(), xs.end());
    for (Index p = 0; p < points_per_task; ++p) {
      const double x = xs[p];
      const Index row = t * points_per_task + p;
      out.data.x[row] = x;
      out.data.y[row] = slope * x + bump * std::sin(std::numbers::pi * x) + offset +
                        0.2 * std::sin(2.0 * std::numbers::pi * freq * x + phase) +
                        0.05 * normal(rng);
      out.data.task.push_back(t);
    }
  }
  return out;
}

}  // namespace skipgp
