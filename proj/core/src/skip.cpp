#include "skipgp/skip.hpp"

#include <algorithm>
#include <bit>

#include "skipgp/krylov.hpp"
#include "skipgp/random.hpp"

namespace skipgp {

namespace {

// T * x for T given by its diagonal and off-diagonal, applied to each column.
Matrix tridiagonal_times(const LanczosFactor& f, const Matrix& x) {
  const Index r = f.rank();
  Matrix out(r, x.cols());
  for (Index i = 0; i < r; ++i) {
    out.row(i) = f.alpha[i] * x.row(i);
    if (i > 0) out.row(i) += f.beta[i - 1] * x.row(i - 1);
    if (i + 1 < r) out.row(i) += f.beta[i] * x.row(i + 1);
  }
  return out;
}

std::uint64_t hadamard_cost(Index n, Index r1, Index r2) {
  const auto nn = static_cast<std::uint64_t>(n);
  const auto a = static_cast<std::uint64_t>(r1);
  const auto b = static_cast<std::uint64_t>(r2);
  return nn * b + 2 * nn * a * b + 6 * a * b + nn * b;
}

}  // namespace

Vector hadamard_mvm(const LanczosFactor& left, const LanczosFactor& right,
                    const Vector& v) {
  if (left.rank() == 0 || right.rank() == 0) {
    throw DimensionError("hadamard_mvm: rank-0 factor");
  }
  require_size(right.rows(), left.rows(), "hadamard_mvm factor rows");
  require_size(v.size(), left.rows(), "hadamard_mvm vector");
  const Matrix scaled_right = v.asDiagonal() * right.basis;
  // core = T1 (Q1^T D_v Q2) T2; T2 symmetric so right-multiplying equals
  // (T2 X^T)^T.
  const Matrix inner = left.basis.transpose() * scaled_right;
  const Matrix core =
      tridiagonal_times(right, tridiagonal_times(left, inner).transpose())
          .transpose();
  return (left.basis * core).cwiseProduct(right.basis).rowwise().sum();
}

HadamardProductOperator::HadamardProductOperator(
    std::shared_ptr<const LanczosFactor> left,
    std::shared_ptr<const LanczosFactor> right)
    : left_(std::move(left)), right_(std::move(right)) {
  if (!left_ || !right_) throw InvalidArgument("HadamardProductOperator: null factor");
  if (left_->rank() == 0 || right_->rank() == 0) {
    throw DimensionError("HadamardProductOperator: rank-0 factor");
  }
  require_size(right_->rows(), left_->rows(), "HadamardProductOperator rows");
}

std::uint64_t HadamardProductOperator::multiply_count() const {
  return hadamard_cost(left_->rows(), left_->rank(), right_->rank());
}

Vector HadamardProductOperator::apply_impl(const Vector& v) const {
  return hadamard_mvm(*left_, *right_, v);
}

// ---------------------------------------------------------------------------

namespace {

struct TreeBuilder {
  const std::vector<OperatorPtr>& components;
  Index rank;
  std::uint64_t seed;
  bool retain;
  std::vector<LanczosFactor>* leaves;

  Vector probe(std::uint64_t node_id) const {
    return unit_normal_probe(components.front()->size(), derive_seed(seed, node_id));
  }

  // Factor of components[begin, end).
  std::shared_ptr<const LanczosFactor> build(std::size_t begin, std::size_t end,
                                             std::uint64_t node_id) const {
    if (end - begin == 1) {
      auto factor = std::make_shared<const LanczosFactor>(
          lanczos_decompose(*components[begin], probe(node_id), rank));
      if (retain) leaves->push_back(*factor);
      return factor;
    }
    const std::size_t mid = begin + (end - begin + 1) / 2;
    auto left = build(begin, mid, 2 * node_id);
    auto right = build(mid, end, 2 * node_id + 1);
    const HadamardProductOperator merged(std::move(left), std::move(right));
    return std::make_shared<const LanczosFactor>(
        lanczos_decompose(merged, probe(node_id), rank));
  }
};

}  // namespace

Index SkipTree::depth() const {
  if (num_components_ <= 1) return 0;
  return static_cast<Index>(
      std::bit_width(static_cast<std::uint64_t>(num_components_ - 1)));
}

const LanczosFactor& SkipTree::right_child() const {
  if (!right_) throw InvalidArgument("single-component SkipTree has no right child");
  return *right_;
}

Vector SkipTree::mvm(const Vector& v) const {
  require_size(v.size(), n_, "skip_mvm");
  if (single_component()) return left_->apply(v);
  return hadamard_mvm(*left_, *right_, v);
}

SkipTree skip_decompose(const std::vector<OperatorPtr>& components, Index rank,
                        std::uint64_t probe_seed, bool retain_leaf_factors) {
  if (components.empty()) throw InvalidArgument("skip_decompose: no components");
  if (rank < 1) throw InvalidArgument("skip_decompose: rank < 1");
  for (const auto& c : components) {
    if (!c) throw InvalidArgument("skip_decompose: null component");
    require_size(c->size(), components.front()->size(),
                 "skip_decompose component size");
  }
  SkipTree tree;
  tree.n_ = components.front()->size();
  tree.num_components_ = static_cast<Index>(components.size());
  tree.rank_ = std::min(rank, tree.n_);
  tree.probe_seed_ = probe_seed;

  const TreeBuilder builder{components, tree.rank_, probe_seed,
                            retain_leaf_factors, &tree.leaf_factors_};
  const std::size_t d = components.size();
  if (d == 1) {
    tree.left_ = builder.build(0, 1, 1);
  } else {
    const std::size_t mid = (d + 1) / 2;
    tree.left_ = builder.build(0, mid, 2);
    tree.right_ = builder.build(mid, d, 3);
  }
  return tree;
}

Vector skip_mvm(const SkipTree& tree, const Vector& v) { return tree.mvm(v); }

SkipOperator::SkipOperator(std::shared_ptr<const SkipTree> tree)
    : tree_(std::move(tree)) {
  if (!tree_) throw InvalidArgument("SkipOperator: null tree");
}

std::uint64_t SkipOperator::multiply_count() const {
  const auto& t = *tree_;
  if (t.single_component()) {
    const auto n = static_cast<std::uint64_t>(t.size());
    const auto r = static_cast<std::uint64_t>(t.root_factor().rank());
    return 2 * n * r + 3 * r;
  }
  return hadamard_cost(t.size(), t.left_child().rank(), t.right_child().rank());
}

}  // namespace skipgp
