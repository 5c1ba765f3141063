#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "skipgp/linop.hpp"

namespace skipgp {

// (A o B) v for A = left.Q left.T left.Q^T and B = right.Q right.T right.Q^T
// without forming either n x n matrix: first the r x r core
// M = T1 Q1^T D_v Q2 T2, then output[i] = q1_i M q2_i^T. O(n r^2).
Vector hadamard_mvm(const LanczosFactor& left, const LanczosFactor& right,
                    const Vector& v);

// The Hadamard product of two low-rank factors as an operator, so that it can
// itself be Lanczos-decomposed one level up the merge tree.
class HadamardProductOperator final : public LinearOperator {
 public:
  HadamardProductOperator(std::shared_ptr<const LanczosFactor> left,
                          std::shared_ptr<const LanczosFactor> right);
  Index size() const override { return left_->rows(); }
  std::uint64_t multiply_count() const override;

 protected:
  Vector apply_impl(const Vector& v) const override;

 private:
  std::shared_ptr<const LanczosFactor> left_;
  std::shared_ptr<const LanczosFactor> right_;
};

inline constexpr Index kDefaultSkipRank = 100;

// Cached decomposition of K = K1 o ... o Kd.
//
// Leaves are Lanczos-decomposed with `rank` applies each, then merged in a
// balanced binary tree (left half takes ceil(d/2) components) by
// Lanczos-decomposing the Hadamard product of the two child factors. Only
// the two children of the root are kept; a product MVM is then a single
// hadamard_mvm and never touches the leaf operators again.
class SkipTree {
 public:
  Index size() const { return n_; }
  Index num_components() const { return num_components_; }
  Index rank_budget() const { return rank_; }
  // ceil(log2 d) merge levels.
  Index depth() const;
  std::uint64_t probe_seed() const { return probe_seed_; }

  // d == 1: the root is the leaf's own factor.
  bool single_component() const { return num_components_ == 1; }
  const LanczosFactor& root_factor() const { return *left_; }
  const LanczosFactor& left_child() const { return *left_; }
  const LanczosFactor& right_child() const;

  // Filled only when decomposed with retain_leaf_factors.
  const std::vector<LanczosFactor>& leaf_factors() const { return leaf_factors_; }

  Vector mvm(const Vector& v) const;

 private:
  friend SkipTree skip_decompose(const std::vector<OperatorPtr>&, Index,
                                 std::uint64_t, bool);

  Index n_ = 0;
  Index num_components_ = 0;
  Index rank_ = 0;
  std::uint64_t probe_seed_ = 0;
  std::shared_ptr<const LanczosFactor> left_;
  std::shared_ptr<const LanczosFactor> right_;
  std::vector<LanczosFactor> leaf_factors_;
};

// Probe for the Lanczos run at tree node `node_id` (root 1, children 2i and
// 2i + 1) is unit_normal_probe(n, derive_seed(probe_seed, node_id)). A rank
// above n is clamped to n.
SkipTree skip_decompose(const std::vector<OperatorPtr>& components, Index rank,
                        std::uint64_t probe_seed,
                        bool retain_leaf_factors = false);

Vector skip_mvm(const SkipTree& tree, const Vector& v);

class SkipOperator final : public LinearOperator {
 public:
  explicit SkipOperator(std::shared_ptr<const SkipTree> tree);
  Index size() const override { return tree_->size(); }
  std::uint64_t multiply_count() const override;
  const SkipTree& tree() const { return *tree_; }

 protected:
  Vector apply_impl(const Vector& v) const override { return tree_->mvm(v); }

 private:
  std::shared_ptr<const SkipTree> tree_;
};

}  // namespace skipgp
