#include <gtest/gtest.h>

#include "skipgp/random.hpp"

#include "skipgp/krylov.hpp"
#include "skipgp/multitask.hpp"
#include "test_support.hpp"

namespace skipgp {
namespace {

using testing::Rng;

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Matrix dense_task_covariance(const std::vector<Index>& task, const Matrix& m) {
  const auto n = static_cast<Index>(task.size());
  Matrix out(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) out(i, j) = m(task[i], task[j]);
  }
  return out;
}

Matrix rbf_gram(const Vector& x, double ls) {
  Matrix k(x.size(), x.size());
  for (Index i = 0; i < x.size(); ++i) {
    for (Index j = 0; j < x.size(); ++j) k(i, j) = testing::rbf_1d(x[i], x[j], ls, 1.0);
  }
  return k;
}

std::vector<Index> random_tasks(Index n, Index s, Rng& rng) {
  std::vector<Index> t(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) t[i] = i < s ? i : rng.integer(0, s - 1);
  return t;
}

// Covariance of the cluster kernel written out entry by entry.
Matrix reference_cluster_covariance(const MultitaskData& data,
                                    const std::vector<Index>& lambda,
                                    const ClusterHyperparameters& h) {
  const Index n = data.size();
  Matrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const Index ti = data.task[i];
      const Index tj = data.task[j];
      double v = 0.0;
      if (lambda[ti] == lambda[tj]) {
        v += testing::matern52_1d(data.x[i], data.x[j], h.cluster_kernel.lengthscales[0],
                                  h.cluster_kernel.outputscale);
      }
      if (ti == tj) {
        v += testing::matern52_1d(data.x[i], data.x[j],
                                  h.individual_kernel.lengthscales[0],
                                  h.individual_kernel.outputscale);
      }
      k(i, j) = v;
    }
  }
  return k;
}

double reference_mll(Matrix k, const Vector& y, double noise, double mean) {
  k.diagonal().array() += noise;
  const Eigen::LLT<Matrix> llt(k);
  const Vector r = y.array() - mean;
  const Matrix l = llt.matrixL();
  return -0.5 * r.dot(llt.solve(r)) - l.diagonal().array().log().sum() -
         0.5 * static_cast<double>(y.size()) * kLog2Pi;
}

ClusterHyperparameters sample_hyper() {
  ClusterHyperparameters h;
  h.cluster_kernel = KernelSpec::matern52(Vector::Constant(1, 0.3), 1.2);
  h.individual_kernel = KernelSpec::matern52(Vector::Constant(1, 0.2), 0.3);
  h.noise_variance = 0.05;
  h.constant_mean = 0.1;
  return h;
}

TEST(TaskOperator, SmallExample) {
  const TaskAssignment a{{0, 0, 1}, 2};
  Coregionalization c;
  c.b = (Matrix(2, 1) << 1.0, 2.0).finished();
  c.kappa = Vector::Constant(2, 0.5);
  // M = [[1.5, 2], [2, 4.5]]; V M V^T [1, 2, 3] = [4.5 + 6, 4.5 + 6, 6 + 13.5].
  const Vector out = task_operator_mvm(a, c, (Vector(3) << 1, 2, 3).finished());
  EXPECT_NEAR(out[0], 10.5, 1e-14);
  EXPECT_NEAR(out[1], 10.5, 1e-14);
  EXPECT_NEAR(out[2], 19.5, 1e-14);
}

TEST(TaskOperator, MatchesDenseExpansion) {
  Rng rng(1);
  for (Index s : {1, 3, 8, 20}) {
    for (Index q : {0, 1, 3}) {
      const Index n = 60;
      const TaskAssignment a{random_tasks(n, s, rng), s};
      Coregionalization c;
      c.b = rng.normal(s, q);
      c.kappa = rng.uniform(s, 0.0, 2.0);
      const Matrix m = c.b * c.b.transpose() + Matrix(c.kappa.asDiagonal());
      const Vector v = rng.normal(n);
      const Vector expected = dense_task_covariance(a.task_of, m) * v;
      EXPECT_LE((task_operator_mvm(a, c, v) - expected).cwiseAbs().maxCoeff(),
                1e-12 * (1.0 + expected.cwiseAbs().maxCoeff()))
          << "s=" << s << " q=" << q;
      const TaskOperator op(a, c);
      EXPECT_LE((op.apply(v) - expected).norm(), 1e-12 * (1.0 + expected.norm()));
    }
  }
}

TEST(TaskOperator, RejectsBadInput) {
  Coregionalization c;
  c.b = Matrix::Ones(2, 1);
  c.kappa = Vector::Ones(2);
  EXPECT_THROW(task_operator_mvm(TaskAssignment{{0, 2}, 2}, c, Vector::Ones(2)),
               DimensionError);
  EXPECT_THROW(task_operator_mvm(TaskAssignment{{0, 1}, 2}, c, Vector::Ones(3)),
               DimensionError);
  c.kappa[0] = -1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(MultitaskOperator, OnesTaskFactorReproducesDataKernel) {
  Rng rng(2);
  const Index n = 80;
  const Vector x = rng.uniform(n, 0.0, 5.0);
  const DenseOperator kd(rbf_gram(x, 1.0));
  const TaskAssignment a{random_tasks(n, 4, rng), 4};
  Coregionalization c;
  c.b = Matrix::Ones(4, 1);
  c.kappa = Vector::Zero(4);
  const auto op = multitask_operator(kd, a, c, n, 3);
  const Vector v = rng.normal(n);
  const LanczosFactor f = lanczos_decompose(kd, unit_normal_probe(n, 3), n);
  EXPECT_LE(testing::relative_error(op->apply(v), f.apply(v)), 1e-10);
}

TEST(MultitaskOperator, FullRankMatchesDenseHadamard) {
  Rng rng(4);
  const Index n = 60;
  // Distinct eigenvalues, so a single-probe Lanczos run spans the space.
  const Matrix kd = testing::random_spd(n, 5);
  const TaskAssignment a{random_tasks(n, 5, rng), 5};
  for (Index q : {0, 2}) {
    Coregionalization c;
    c.b = rng.normal(5, q);
    c.kappa = Vector::Ones(5);
    const Matrix m = c.b * c.b.transpose() + Matrix(c.kappa.asDiagonal());
    const Matrix expected = kd.cwiseProduct(dense_task_covariance(a.task_of, m));
    const auto op = multitask_operator(DenseOperator(kd), a, c, n, 5);
    const Vector v = rng.normal(n);
    EXPECT_LE(testing::relative_error(op->apply(v), expected * v), 1e-8) << "q=" << q;
  }
}

TEST(MultitaskOperator, LowRankDataKernelIsAccurate) {
  Rng rng(6);
  const Index n = 400;
  const Vector x = rng.uniform(n, 0.0, 1.0);
  const Matrix kd = rbf_gram(x, 0.2);
  const TaskAssignment a{random_tasks(n, 10, rng), 10};
  Coregionalization c;
  c.b = rng.normal(10, 2);
  c.kappa = rng.uniform(10, 0.1, 1.0);
  const Matrix m = c.b * c.b.transpose() + Matrix(c.kappa.asDiagonal());
  const Matrix expected = kd.cwiseProduct(dense_task_covariance(a.task_of, m));
  const auto op = multitask_operator(DenseOperator(kd), a, c, 50, 7);
  const Vector v = rng.normal(n);
  EXPECT_LE(testing::relative_error(op->apply(v), expected * v), 1e-2);
}

class ClusterMll : public ::testing::Test {
 protected:
  static MultitaskData make_data(Index s, Index per_task, std::uint64_t seed) {
    return synthetic_growth_curves(s, 2, per_task, seed).data;
  }
};

TEST_F(ClusterMll, CovarianceMatchesReference) {
  const MultitaskData data = make_data(5, 6, 1);
  const std::vector<Index> lambda{0, 1, 0, 2, 1};
  const ClusterHyperparameters h = sample_hyper();
  EXPECT_LE((cluster_covariance_dense(data, lambda, h) -
             reference_cluster_covariance(data, lambda, h))
                .cwiseAbs()
                .maxCoeff(),
            1e-13);
}

TEST_F(ClusterMll, SingleClusterIsOneGp) {
  const MultitaskData data = make_data(4, 10, 2);
  const ClusterHyperparameters h = sample_hyper();
  const std::vector<Index> lambda(4, 0);
  const double expected = reference_mll(reference_cluster_covariance(data, lambda, h),
                                        data.y, h.noise_variance, h.constant_mean);
  EXPECT_NEAR(cluster_kernel_mll(lambda, 1, h, data, {}, 0), expected, 1e-9);
}

TEST_F(ClusterMll, ExactMatchesDenseOracle) {
  const MultitaskData data = make_data(6, 8, 3);
  const ClusterHyperparameters h = sample_hyper();
  const std::vector<Index> lambda{1, 0, 1, 1, 0, 2};
  const double expected = reference_mll(reference_cluster_covariance(data, lambda, h),
                                        data.y, h.noise_variance, h.constant_mean);
  EXPECT_NEAR(cluster_kernel_mll(lambda, 3, h, data, {}, 0), expected, 1e-8);
}

TEST_F(ClusterMll, SeparateClustersAreIndependent) {
  const MultitaskData data = make_data(4, 7, 4);
  const ClusterHyperparameters h = sample_hyper();
  const double joint = cluster_kernel_mll({0, 0, 1, 1}, 2, h, data, {}, 0);
  const double first = cluster_kernel_mll({0, 0}, 1, h, data.subset_tasks({0, 1}), {}, 0);
  const double second = cluster_kernel_mll({0, 0}, 1, h, data.subset_tasks({2, 3}), {}, 0);
  EXPECT_NEAR(joint, first + second, 1e-9);
}

TEST_F(ClusterMll, SkipModeWithinTwoPercentOfDense) {
  const MultitaskData data = make_data(8, 25, 5);
  ASSERT_EQ(data.size(), 200);
  const ClusterHyperparameters h = sample_hyper();
  const std::vector<Index> lambda{0, 1, 0, 1, 0, 1, 1, 0};
  const double expected = reference_mll(reference_cluster_covariance(data, lambda, h),
                                        data.y, h.noise_variance, h.constant_mean);
  ClusterInference skip;
  skip.mode = InferenceMode::kSkip;
  const double approx = cluster_kernel_mll(lambda, 2, h, data, skip, 11);
  EXPECT_LE(std::abs(approx - expected) / std::abs(expected), 0.02);
}

TEST_F(ClusterMll, EvaluatorCountsCalls) {
  const MultitaskData data = make_data(3, 5, 6);
  ClusterMllEvaluator eval(data, {});
  const ClusterHyperparameters h = sample_hyper();
  eval({0, 0, 0}, 1, h, 0);
  eval({0, 1, 0}, 2, h, 0);
  EXPECT_EQ(eval.evaluations(), 2u);
}

TEST(Gibbs, SingleClusterKeepsAssignment) {
  const MultitaskData data = synthetic_growth_curves(5, 1, 6, 7).data;
  ClusterState state = initial_cluster_state(data, 1, 7);
  ClusterMllEvaluator eval(data, {});
  const GibbsSweepResult r = gibbs_sweep(state, eval);
  EXPECT_EQ(r.state.lambda, std::vector<Index>(5, 0));
  EXPECT_EQ(r.mll_evaluations, 5u);
  EXPECT_LE((r.posterior_weights.array() - 1.0).abs().maxCoeff(), 1e-15);
  EXPECT_EQ(r.state.sweeps_completed, 1);
}

TEST(Gibbs, EvaluationCountAndNormalizedWeights) {
  const MultitaskData data = synthetic_growth_curves(6, 3, 8, 8).data;
  const ClusterState state = initial_cluster_state(data, 3, 8);
  ClusterMllEvaluator eval(data, {});
  const GibbsSweepResult r = gibbs_sweep(state, eval);
  EXPECT_EQ(r.mll_evaluations, 18u);
  for (Index i = 0; i < 6; ++i) {
    EXPECT_NEAR(r.posterior_weights.row(i).sum(), 1.0, 1e-12);
    EXPECT_GE(r.posterior_weights.row(i).minCoeff(), 0.0);
  }
  const double mll = cluster_kernel_mll(r.state.lambda, 3, state.hyper, data, {}, 0);
  EXPECT_NEAR(r.mll, mll, 1e-9);
}

TEST(Gibbs, DeterministicGivenState) {
  const MultitaskData data = synthetic_growth_curves(6, 2, 8, 9).data;
  const ClusterState state = initial_cluster_state(data, 2, 9);
  ClusterMllEvaluator e1(data, {});
  ClusterMllEvaluator e2(data, {});
  EXPECT_EQ(gibbs_sweep(state, e1).state.lambda, gibbs_sweep(state, e2).state.lambda);
}

TEST(Gibbs, ConditionalWeightsMatchEnumeration) {
  // First task's weights: softmax over the mll with task 0 moved to each cluster.
  const MultitaskData data = synthetic_growth_curves(4, 2, 6, 10).data;
  const ClusterState state = initial_cluster_state(data, 2, 10);
  ClusterMllEvaluator eval(data, {});
  const GibbsSweepResult r = gibbs_sweep(state, eval);
  Vector logits(2);
  for (Index a = 0; a < 2; ++a) {
    std::vector<Index> lambda = state.lambda;
    lambda[0] = a;
    logits[a] = cluster_kernel_mll(lambda, 2, state.hyper, data, {}, 0);
  }
  const double p0 = 1.0 / (1.0 + std::exp(logits[1] - logits[0]));
  EXPECT_NEAR(r.posterior_weights(0, 0), p0, 1e-10);
}

TEST(ClusterFit, TraceAndMembership) {
  const SyntheticTasks syn = synthetic_growth_curves(6, 2, 10, 11);
  ClusterFitSettings settings;
  settings.num_clusters = 2;
  settings.sweeps = 4;
  settings.burn_in = 1;
  settings.seed = 11;
  const ClusterFitResult r = fit_cluster_model(syn.data, settings);
  ASSERT_EQ(r.trace.size(), 4u);
  EXPECT_EQ(r.state.sweeps_completed, 4);
  EXPECT_EQ(r.membership_frequency.rows(), 6);
  for (Index i = 0; i < 6; ++i) {
    EXPECT_NEAR(r.membership_frequency.row(i).sum(), 1.0, 1e-12);
  }
  EXPECT_GE(r.mll_evaluations, 4u * 2u * 6u);
}

TEST(PredictTask, MembershipNormalizedAndUniformWithoutData) {
  const SyntheticTasks syn = synthetic_growth_curves(6, 2, 10, 12);
  ClusterState state = initial_cluster_state(syn.data, 2, 12);
  state.lambda = syn.cluster_of_task;
  state.hyper = default_cluster_hyperparameters(syn.data);
  const Vector xstar = Vector::LinSpaced(5, 0.0, 1.0);
  const TaskPrediction empty =
      predict_task(state, syn.data, Vector(0), Vector(0), xstar, {}, 0);
  EXPECT_NEAR(empty.membership[0], 0.5, 1e-15);
  EXPECT_NEAR(empty.membership[1], 0.5, 1e-15);
  EXPECT_GE(empty.variance.minCoeff(), 0.0);

  const Vector xn = Vector::LinSpaced(4, 0.1, 0.4);
  const Vector yn = Vector::Constant(4, 0.2);
  const TaskPrediction p = predict_task(state, syn.data, xn, yn, xstar, {}, 0);
  EXPECT_NEAR(p.membership.sum(), 1.0, 1e-12);
}

TEST(PredictTask, ExistingTaskEqualsRemovedAndReadded) {
  const SyntheticTasks syn = synthetic_growth_curves(5, 2, 8, 13);
  ClusterState state = initial_cluster_state(syn.data, 2, 13);
  state.lambda = syn.cluster_of_task;
  state.hyper = default_cluster_hyperparameters(syn.data);
  const Vector xstar = Vector::LinSpaced(7, 0.0, 1.0);
  const TaskPrediction via_id = predict_task(state, syn.data, 2, xstar, {}, 0);

  const std::vector<Index> rows = syn.data.rows_of_task(2);
  Vector xt(static_cast<Index>(rows.size()));
  Vector yt(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    xt[k] = syn.data.x[rows[k]];
    yt[k] = syn.data.y[rows[k]];
  }
  ClusterState reduced = state;
  reduced.lambda = {state.lambda[0], state.lambda[1], state.lambda[3], state.lambda[4]};
  const TaskPrediction direct =
      predict_task(reduced, syn.data.subset_tasks({0, 1, 3, 4}), xt, yt, xstar, {}, 0);
  EXPECT_LE((via_id.mean - direct.mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((via_id.membership - direct.membership).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PredictTask, SingleClusterMatchesGpConditional) {
  // c = 1: the predictive is the Gaussian conditional under the joint kernel.
  const SyntheticTasks syn = synthetic_growth_curves(3, 1, 6, 14);
  ClusterState state = initial_cluster_state(syn.data, 1, 14);
  state.hyper = sample_hyper();
  const Vector xn = (Vector(2) << 0.2, 0.6).finished();
  const Vector yn = (Vector(2) << 0.5, -0.1).finished();
  const Vector xstar = (Vector(1) << 0.4).finished();
  const TaskPrediction p = predict_task(state, syn.data, xn, yn, xstar, {}, 0);

  // Oracle: append the test point as a noiseless observation of the new task.
  MultitaskData joint = syn.data.with_new_task(
      (Vector(3) << xn[0], xn[1], xstar[0]).finished(), Vector::Zero(3));
  const Matrix k = reference_cluster_covariance(joint, {0, 0, 0, 0}, state.hyper);
  const Index n = joint.size() - 1;
  Matrix kxx = k.topLeftCorner(n, n);
  kxx.diagonal().array() += state.hyper.noise_variance;
  Vector y(n);
  y << syn.data.y, yn;
  const Vector kxs = k.col(n).head(n);
  const Vector alpha = kxx.ldlt().solve(Vector(y.array() - state.hyper.constant_mean));
  EXPECT_NEAR(p.mean[0], state.hyper.constant_mean + kxs.dot(alpha), 1e-9);
  EXPECT_NEAR(p.variance[0], k(n, n) - kxs.dot(kxx.ldlt().solve(kxs)), 1e-9);
}

TEST(AdjustedRandIndex, KnownValues) {
  EXPECT_DOUBLE_EQ(adjusted_rand_index({0, 0, 1, 1}, {0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(adjusted_rand_index({0, 0, 1, 1}, {1, 1, 0, 0}), 1.0);
  EXPECT_NEAR(adjusted_rand_index({0, 0, 1, 1}, {0, 1, 0, 1}), -0.5, 1e-15);
  EXPECT_THROW(adjusted_rand_index({0, 1}, {0}), DimensionError);
}

TEST(Synthetic, ShapeAndRoundRobinClusters) {
  const SyntheticTasks syn = synthetic_growth_curves(7, 3, 12, 15);
  EXPECT_EQ(syn.data.size(), 84);
  EXPECT_EQ(syn.data.num_tasks, 7);
  EXPECT_EQ(syn.cluster_of_task, (std::vector<Index>{0, 1, 2, 0, 1, 2, 0}));
  EXPECT_GE(syn.data.x.minCoeff(), 0.0);
  EXPECT_LE(syn.data.x.maxCoeff(), 1.0);
  for (Index t = 0; t < 7; ++t) {
    const std::vector<Index> rows = syn.data.rows_of_task(t);
    ASSERT_EQ(rows.size(), 12u);
    for (std::size_t k = 1; k < rows.size(); ++k) {
      EXPECT_LE(syn.data.x[rows[k - 1]], syn.data.x[rows[k]]);
    }
  }
  const SyntheticTasks again = synthetic_growth_curves(7, 3, 12, 15);
  EXPECT_EQ(again.data.y, syn.data.y);
}

}  // namespace
}  // namespace skipgp
