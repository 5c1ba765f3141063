#include <benchmark/benchmark.h>

#include <span>
#include <vector>

#include "skipgp/kernels.hpp"
#include "skipgp/krylov.hpp"
#include "skipgp/linop.hpp"
#include "skipgp/random.hpp"
#include "skipgp/ski.hpp"
#include "skipgp/skip.hpp"

namespace {

using namespace skipgp;

std::vector<OperatorPtr> ski_leaves(Index n, Index d, Index m) {
  std::vector<OperatorPtr> leaves;
  for (Index c = 0; c < d; ++c) {
    const Vector x = standard_normal(n, derive_seed(1, static_cast<std::uint64_t>(c)));
    leaves.push_back(ski_operator(KernelSpec::rbf(Vector::Ones(1), 1.0),
                                  std::span<const double>(x.data(), n), m));
  }
  return leaves;
}

void BM_ToeplitzMvm(benchmark::State& state) {
  const Index m = state.range(0);
  Vector column(m);
  for (Index i = 0; i < m; ++i) column[i] = std::exp(-0.01 * static_cast<double>(i * i));
  const ToeplitzOperator op(column);
  const Vector v = standard_normal(m, 2);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(v));
  state.SetComplexityN(m);
}
BENCHMARK(BM_ToeplitzMvm)->RangeMultiplier(4)->Range(64, 16384)->Complexity();

void BM_SkiMvm(benchmark::State& state) {
  const Index n = state.range(0);
  const auto leaves = ski_leaves(n, 1, 200);
  const Vector v = standard_normal(n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(leaves.front()->apply(v));
  state.SetComplexityN(n);
}
BENCHMARK(BM_SkiMvm)->RangeMultiplier(4)->Range(256, 65536)->Complexity();

void BM_HadamardMvm(benchmark::State& state) {
  const Index n = state.range(0);
  const Index r = state.range(1);
  const auto leaves = ski_leaves(n, 2, 100);
  const LanczosFactor a = lanczos_decompose(*leaves[0], unit_normal_probe(n, 4), r);
  const LanczosFactor b = lanczos_decompose(*leaves[1], unit_normal_probe(n, 5), r);
  const Vector v = standard_normal(n, 6);
  for (auto _ : state) benchmark::DoNotOptimize(hadamard_mvm(a, b, v));
}
BENCHMARK(BM_HadamardMvm)->ArgsProduct({{1000, 4000, 16000}, {10, 30}});

void BM_SkipDecompose(benchmark::State& state) {
  const Index n = state.range(0);
  const Index d = state.range(1);
  const auto leaves = ski_leaves(n, d, 100);
  for (auto _ : state) benchmark::DoNotOptimize(skip_decompose(leaves, 30, 7));
}
BENCHMARK(BM_SkipDecompose)->ArgsProduct({{1000, 4000}, {2, 4, 8}})->Unit(benchmark::kMillisecond);

void BM_SkipMvm(benchmark::State& state) {
  const Index n = state.range(0);
  const Index d = state.range(1);
  const SkipTree tree = skip_decompose(ski_leaves(n, d, 100), 30, 7);
  const Vector v = standard_normal(n, 8);
  for (auto _ : state) benchmark::DoNotOptimize(skip_mvm(tree, v));
}
BENCHMARK(BM_SkipMvm)->ArgsProduct({{1000, 4000, 16000}, {2, 8}});

}  // namespace

BENCHMARK_MAIN();
