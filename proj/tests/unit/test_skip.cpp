#include <gtest/gtest.h>

#include <algorithm>

#include "skipgp/krylov.hpp"
#include "skipgp/ski.hpp"
#include "skipgp/skip.hpp"
#include "test_support.hpp"

namespace skipgp {
namespace {

using testing::Rng;

LanczosFactor full_factor(const Matrix& a, std::uint64_t seed) {
  return lanczos_decompose(DenseOperator(a), Rng(seed).normal(a.rows()), a.rows());
}

Matrix rbf_matrix(const Vector& x) {
  Matrix k(x.size(), x.size());
  for (Index i = 0; i < x.size(); ++i) {
    for (Index j = 0; j < x.size(); ++j) k(i, j) = testing::rbf_1d(x[i], x[j], 1.0, 1.0);
  }
  return k;
}

std::vector<OperatorPtr> dense_ops(const std::vector<Matrix>& mats) {
  std::vector<OperatorPtr> ops;
  for (const auto& m : mats) ops.push_back(std::make_shared<const DenseOperator>(m));
  return ops;
}

Matrix hadamard_all(const std::vector<Matrix>& mats) {
  Matrix out = mats.front();
  for (std::size_t k = 1; k < mats.size(); ++k) out = out.cwiseProduct(mats[k]);
  return out;
}

TEST(HadamardMvm, OnesFactorIsNeutral) {
  const Index n = 30;
  LanczosFactor ones;
  ones.basis = Matrix::Constant(n, 1, 1.0 / std::sqrt(static_cast<double>(n)));
  ones.alpha = Vector::Constant(1, static_cast<double>(n));
  ones.beta = Vector(0);
  const Matrix b = testing::random_spd(n, 3);
  const Vector v = Rng(4).normal(n);
  EXPECT_LE(testing::relative_error(hadamard_mvm(ones, full_factor(b, 5), v), b * v), 1e-10);
}

TEST(HadamardMvm, IdentityFactors) {
  const Index n = 12;
  LanczosFactor eye;
  eye.basis = Matrix::Identity(n, n);
  eye.alpha = Vector::Ones(n);
  eye.beta = Vector::Zero(n - 1);
  const Vector v = Rng(6).normal(n);
  EXPECT_LE((hadamard_mvm(eye, eye, v) - v).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(HadamardMvm, FullRankMatchesDenseProduct) {
  const Index n = 100;
  const Matrix a = testing::random_spd(n, 7);
  const Matrix b = testing::random_spd(n, 8);
  const Vector v = Rng(9).normal(n);
  const Vector exact = a.cwiseProduct(b) * v;
  EXPECT_LE(testing::relative_error(hadamard_mvm(full_factor(a, 10), full_factor(b, 11), v),
                                    exact),
            1e-8);
}

TEST(HadamardMvm, RejectsEmptyOrMismatched) {
  LanczosFactor empty;
  empty.basis = Matrix(5, 0);
  const LanczosFactor f = full_factor(testing::random_spd(5, 1), 2);
  EXPECT_THROW(hadamard_mvm(empty, f, Vector::Ones(5)), DimensionError);
  const LanczosFactor g = full_factor(testing::random_spd(6, 1), 2);
  EXPECT_THROW(hadamard_mvm(f, g, Vector::Ones(5)), DimensionError);
  EXPECT_THROW(hadamard_mvm(f, f, Vector::Ones(4)), DimensionError);
}

TEST(SkipDecompose, SingleComponentUsesLeafFactor) {
  const Index n = 40;
  const Matrix a = testing::random_spd(n, 12);
  const SkipTree tree = skip_decompose(dense_ops({a}), n, 3);
  EXPECT_TRUE(tree.single_component());
  EXPECT_EQ(tree.depth(), 0);
  EXPECT_LE((tree.root_factor().reconstruct() - a).norm() / a.norm(), 1e-8);
  const Vector v = Rng(13).normal(n);
  EXPECT_LE(testing::relative_error(skip_mvm(tree, v), a * v), 1e-8);
}

TEST(SkipDecompose, FullRankIsExactForSeveralComponentCounts) {
  const Index n = 25;
  for (Index d : {2, 3, 4, 5}) {
    std::vector<Matrix> mats;
    for (Index k = 0; k < d; ++k) mats.push_back(testing::random_spd(n, 100 + k, 0.5));
    const Matrix exact = hadamard_all(mats);
    const auto tree = std::make_shared<const SkipTree>(skip_decompose(dense_ops(mats), n, 14));
    EXPECT_EQ(tree->depth(), static_cast<Index>(std::bit_width(static_cast<unsigned>(d - 1))));
    const Matrix represented = SkipOperator(tree).to_dense();
    EXPECT_LE((represented - exact).norm() / exact.norm(), 1e-6) << "d=" << d;
  }
}

TEST(SkipDecompose, ExactLeafBudgetAndCachedMvms) {
  const Index n = 200;
  const Index r = 15;
  const Matrix x = Rng(15).normal(n, 4);
  std::vector<std::shared_ptr<const CountingOperator>> counters;
  std::vector<OperatorPtr> leaves;
  for (Index j = 0; j < 4; ++j) {
    const Vector column = x.col(j);
    counters.push_back(std::make_shared<const CountingOperator>(ski_operator(
        KernelSpec::rbf(Vector::Ones(1), 1.0),
        std::span<const double>(column.data(), static_cast<std::size_t>(n)), 100)));
    leaves.push_back(counters.back());
  }
  const SkipTree tree = skip_decompose(leaves, r, 16);
  for (const auto& c : counters) EXPECT_EQ(c->applies(), static_cast<std::uint64_t>(r));
  Rng rng(17);
  for (int k = 0; k < 50; ++k) skip_mvm(tree, rng.normal(n));
  for (const auto& c : counters) EXPECT_EQ(c->applies(), static_cast<std::uint64_t>(r));
}

TEST(SkipMvm, ZeroLinearAndSymmetric) {
  const Index n = 150;
  const Matrix x = Rng(18).normal(n, 3);
  std::vector<Matrix> mats;
  for (Index j = 0; j < 3; ++j) mats.push_back(rbf_matrix(x.col(j)));
  const SkipTree tree = skip_decompose(dense_ops(mats), 20, 19);
  EXPECT_EQ(skip_mvm(tree, Vector::Zero(n)).norm(), 0.0);
  Rng rng(20);
  const Vector u = rng.normal(n);
  const Vector w = rng.normal(n);
  const Vector combined = skip_mvm(tree, 2.0 * u + w);
  EXPECT_LE((combined - (2.0 * skip_mvm(tree, u) + skip_mvm(tree, w))).norm(),
            1e-10 * combined.norm());
  EXPECT_LE(std::abs(u.dot(skip_mvm(tree, w)) - w.dot(skip_mvm(tree, u))),
            1e-6 * u.norm() * w.norm());
  EXPECT_THROW(skip_mvm(tree, Vector::Ones(n + 1)), DimensionError);
}

TEST(SkipDecompose, ComponentSizeMismatchThrows) {
  const auto ops = dense_ops({testing::random_spd(10, 1), testing::random_spd(11, 2)});
  EXPECT_THROW(skip_decompose(ops, 5, 0), DimensionError);
  EXPECT_THROW(skip_decompose({}, 5, 0), InvalidArgument);
}

TEST(SkipDecompose, RetainsLeafFactorsOnRequest) {
  const auto ops = dense_ops({testing::random_spd(20, 1), testing::random_spd(20, 2),
                              testing::random_spd(20, 3)});
  EXPECT_TRUE(skip_decompose(ops, 5, 0).leaf_factors().empty());
  const SkipTree kept = skip_decompose(ops, 5, 0, true);
  ASSERT_EQ(kept.leaf_factors().size(), 3u);
  for (const auto& f : kept.leaf_factors()) EXPECT_EQ(f.rank(), 5);
}

TEST(SkipDecompose, DeterministicForSeed) {
  const Matrix x = Rng(21).normal(60, 2);
  const auto ops = dense_ops({rbf_matrix(x.col(0)), rbf_matrix(x.col(1))});
  const Vector v = Rng(22).normal(60);
  EXPECT_EQ(skip_mvm(skip_decompose(ops, 10, 5), v), skip_mvm(skip_decompose(ops, 10, 5), v));
}

TEST(SkipDecompose, ErrorGrowsWithComponentCount) {
  // Median over seeds of the relative error at a fixed rank.
  const Index n = 200;
  const Index r = 20;
  std::vector<double> low;
  std::vector<double> high;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (Index d : {4, 12}) {
      const Matrix x = Rng(300 + seed).normal(n, d);
      std::vector<Matrix> mats;
      for (Index j = 0; j < d; ++j) mats.push_back(rbf_matrix(x.col(j)));
      const Vector v = Rng(400 + seed).normal(n);
      const double error = testing::relative_error(
          skip_mvm(skip_decompose(dense_ops(mats), r, seed), v), hadamard_all(mats) * v);
      (d == 4 ? low : high).push_back(error);
    }
  }
  std::sort(low.begin(), low.end());
  std::sort(high.begin(), high.end());
  EXPECT_GE(high[1], low[1]);
}

TEST(SkipMvm, RankMonotoneAccuracy) {
  const Index n = 300;
  const Matrix x = Rng(23).normal(n, 4);
  std::vector<Matrix> mats;
  for (Index j = 0; j < 4; ++j) mats.push_back(rbf_matrix(x.col(j)));
  const Matrix exact = hadamard_all(mats);
  Rng rng(24);
  std::vector<Vector> probes;
  for (int k = 0; k < 20; ++k) probes.push_back(rng.normal(n));
  double previous = std::numeric_limits<double>::infinity();
  for (Index r : {5, 10, 20, 30, 50}) {
    const SkipTree tree = skip_decompose(dense_ops(mats), r, 25);
    std::vector<double> errors;
    for (const auto& v : probes) {
      errors.push_back(testing::relative_error(skip_mvm(tree, v), exact * v));
    }
    std::nth_element(errors.begin(), errors.begin() + 10, errors.end());
    EXPECT_LE(errors[10], previous) << "r=" << r;
    previous = errors[10];
  }
}

}  // namespace
}  // namespace skipgp
