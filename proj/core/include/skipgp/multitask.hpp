#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "skipgp/gp.hpp"
#include "skipgp/kernels.hpp"
#include "skipgp/linop.hpp"

namespace skipgp {

// One-hot incidence V (n x s) stored as a task index per observation.
struct TaskAssignment {
  std::vector<Index> task_of;
  Index num_tasks = 0;

  Index size() const { return static_cast<Index>(task_of.size()); }
  // Throws DimensionError on an index outside [0, num_tasks).
  void validate() const;
};

// Task covariance M = B B^T + diag(kappa); B is s x q, kappa >= 0.
struct Coregionalization {
  Matrix b;
  Vector kappa;

  Index num_tasks() const { return kappa.size(); }
  Index rank() const { return b.cols(); }
  void validate() const;
  Matrix task_covariance() const;
};

// V M V^T v through a gather (V^T v), the factored s x s product and a
// scatter back. O(n + s q); M is never expanded to n x n.
Vector task_operator_mvm(const TaskAssignment& assignment,
                         const Coregionalization& coreg, const Vector& v);

class TaskOperator final : public LinearOperator {
 public:
  TaskOperator(TaskAssignment assignment, Coregionalization coreg);
  Index size() const override { return assignment_.size(); }
  std::uint64_t multiply_count() const override;

 protected:
  Vector apply_impl(const Vector& v) const override;

 private:
  TaskAssignment assignment_;
  Coregionalization coreg_;
};

// K_data o (V M V^T) where K_data is given by a Lanczos factor Q T Q^T and
// the task side is used exactly. Per product:
//   B B^T part:   out_i = q_i T [sum_j v_j q_j^T b_{t_j}] b_{t_i}^T
//   diag(kappa):  out_i = kappa_{t_i} q_i T sum_{j : t_j = t_i} v_j q_j^T
// which is O(n r q + s r^2).
class MultitaskOperator final : public LinearOperator {
 public:
  MultitaskOperator(std::shared_ptr<const LanczosFactor> data_factor,
                    TaskAssignment assignment, Coregionalization coreg);
  Index size() const override { return data_->rows(); }
  std::uint64_t multiply_count() const override;

 protected:
  Vector apply_impl(const Vector& v) const override;

 private:
  std::shared_ptr<const LanczosFactor> data_;
  TaskAssignment assignment_;
  Coregionalization coreg_;
};

// Lanczos-decomposes `data_kernel` at `rank` (probe from `seed`) and pairs it
// with the exact task factor.
std::shared_ptr<const MultitaskOperator> multitask_operator(
    const LinearOperator& data_kernel, const TaskAssignment& assignment,
    const Coregionalization& coreg, Index rank, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Cluster-based multi-task GP.

// Observations (x, y) with a task index each. Inputs are one-dimensional.
struct MultitaskData {
  Vector x;
  Vector y;
  std::vector<Index> task;
  Index num_tasks = 0;

  Index size() const { return x.size(); }
  void validate() const;
  // Observation indices of task t, in order.
  std::vector<Index> rows_of_task(Index t) const;
  // Data restricted to the listed tasks, renumbered 0..k-1 in list order.
  MultitaskData subset_tasks(const std::vector<Index>& tasks) const;
  // This data with one more task appended (index num_tasks).
  MultitaskData with_new_task(const Vector& x_new, const Vector& y_new) const;
};

// k((x, i), (x', j)) = k_cluster(x, x') [lambda_i == lambda_j]
//                     + k_indiv(x, x') [i == j],
// both Matern 5/2, plus noise and a constant mean.
struct ClusterHyperparameters {
  KernelSpec cluster_kernel = KernelSpec::matern52(Vector::Ones(1), 1.0);
  KernelSpec individual_kernel = KernelSpec::matern52(Vector::Ones(1), 1.0);
  double noise_variance = 0.1;
  double constant_mean = 0.0;

  void validate() const;
};

// lengthscales = std(x), outputscales 0.5 var(y) each, noise 0.1 var(y),
// mean = mean(y).
ClusterHyperparameters default_cluster_hyperparameters(const MultitaskData& data);

// [log l_c, log s_c, log l_i, log s_i, log noise]; the mean is fixed.
Vector pack_cluster_hyperparameters(const ClusterHyperparameters& h);
ClusterHyperparameters unpack_cluster_hyperparameters(
    const ClusterHyperparameters& base, const Vector& theta);

struct ClusterState {
  // Cluster of each task, 0-based (reported 1-based in traces).
  std::vector<Index> lambda;
  Index num_clusters = 1;
  ClusterHyperparameters hyper;
  std::uint64_t rng_seed = 0;
  Index sweeps_completed = 0;

  void validate(Index num_tasks) const;
};

// Uniformly random initial assignment drawn from `seed`.
ClusterState initial_cluster_state(const MultitaskData& data, Index num_clusters,
                                   std::uint64_t seed);

struct ClusterInference {
  InferenceMode mode = InferenceMode::kExactDense;
  Index grid_size = 100;
  Index rank = 50;
  Index num_probes = 30;
  double cg_tolerance = 1e-6;
};

// Dense covariance of the cluster kernel (no noise). For tests and small
// problems.
Matrix cluster_covariance_dense(const MultitaskData& data,
                                const std::vector<Index>& lambda,
                                const ClusterHyperparameters& hyper);

// Marginal log likelihood of the cluster kernel, counting calls.
//
// Exact mode factors one dense block per cluster (the covariance is block
// diagonal in clusters). Skip mode writes both terms as Hadamard products of
// a SKI data kernel with an indicator task operator (cluster incidence and
// task incidence), sums them with the noise, and uses CG + SLQ. The SKI
// Lanczos factors depend only on the hyperparameters and seed, so they are
// cached across assignments.
class ClusterMllEvaluator {
 public:
  ClusterMllEvaluator(const MultitaskData& data, ClusterInference settings);

  double operator()(const std::vector<Index>& lambda, Index num_clusters,
                    const ClusterHyperparameters& hyper, std::uint64_t seed);

  std::uint64_t evaluations() const { return evaluations_; }
  const MultitaskData& data() const { return data_; }
  const ClusterInference& settings() const { return settings_; }

 private:
  struct FactorCache;

  double exact(const std::vector<Index>& lambda, Index num_clusters,
               const ClusterHyperparameters& hyper) const;
  double skip(const std::vector<Index>& lambda, Index num_clusters,
              const ClusterHyperparameters& hyper, std::uint64_t seed);

  MultitaskData data_;
  ClusterInference settings_;
  std::uint64_t evaluations_ = 0;
  std::shared_ptr<FactorCache> cache_;
};

double cluster_kernel_mll(const std::vector<Index>& lambda, Index num_clusters,
                          const ClusterHyperparameters& hyper,
                          const MultitaskData& data,
                          const ClusterInference& settings, std::uint64_t seed);

struct GibbsSweepResult {
  ClusterState state;
  // Row i: conditional posterior over clusters for task i at its turn.
  Matrix posterior_weights;
  std::uint64_t mll_evaluations = 0;
  // mll of the returned assignment.
  double mll = 0.0;
};

// One systematic scan: for each task in order, evaluate the mll under every
// candidate cluster with the other assignments fixed, softmax with the
// uniform log prior, and sample. Exactly c * s mll evaluations, all sharing
// one probe seed.
GibbsSweepResult gibbs_sweep(const ClusterState& state,
                             ClusterMllEvaluator& evaluator);

struct ClusterFitSettings {
  Index num_clusters = 3;
  Index sweeps = 20;
  Index burn_in = 5;
  // ADAM steps on the hyperparameters between Gibbs sweeps; 0 keeps them
  // fixed.
  Index adam_steps_per_sweep = 5;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  ClusterInference inference;
};

struct ClusterTraceEntry {
  Index sweep = 0;
  std::vector<Index> lambda;
  double mll = 0.0;
};

struct ClusterFitResult {
  ClusterState state;
  std::vector<ClusterTraceEntry> trace;
  // Fraction of post-burn-in sweeps each task spent in each cluster.
  Matrix membership_frequency;
  std::uint64_t mll_evaluations = 0;
};

// Alternates ADAM steps on the hyperparameters with Gibbs sweeps over the
// assignments, starting from initial_cluster_state(data, c, seed) with
// default_cluster_hyperparameters(data) unless `initial` is given.
ClusterFitResult fit_cluster_model(const MultitaskData& data,
                                   const ClusterFitSettings& settings,
                                   std::optional<ClusterState> initial = std::nullopt);

struct TaskPrediction {
  Vector mean;
  Vector variance;
  Vector membership;
};

// Predictive distribution of a new task given its (possibly empty)
// observations: membership probabilities from the normalized per-cluster mll
// of the data with the new task appended, and the membership-weighted
// mixture of the per-cluster Gaussian predictives at `xstar`.
TaskPrediction predict_task(const ClusterState& state, const MultitaskData& data,
                            const Vector& x_new, const Vector& y_new,
                            const Vector& xstar, const ClusterInference& settings,
                            std::uint64_t seed);

// Same, for an existing task: its observations are removed from `data` and
// treated as the new task's.
TaskPrediction predict_task(const ClusterState& state, const MultitaskData& data,
                            Index task_id, const Vector& xstar,
                            const ClusterInference& settings, std::uint64_t seed);

double adjusted_rand_index(const std::vector<Index>& a, const std::vector<Index>& b);

// Growth-curve style data: cluster k follows its own saturating trend, each
// task adds a smooth individual deviation and noise. Inputs lie in [0, 1].
struct SyntheticTasks {
  MultitaskData data;
  std::vector<Index> cluster_of_task;
};

SyntheticTasks synthetic_growth_curves(Index num_tasks, Index num_clusters,
                                       Index points_per_task, std::uint64_t seed);

}  // namespace skipgp
