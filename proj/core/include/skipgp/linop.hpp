#pragma once

#include <array>
#include <atomic>
#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "skipgp/types.hpp"

namespace skipgp {

// Largest operator the library will materialize densely. Dense forms exist
// for tests and exact small-scale paths only.
inline constexpr Index kMaxDenseSize = 4096;

// A symmetric n x n operator that is only accessed through products with
// vectors. Implementations are immutable after construction and apply() is
// safe to call concurrently.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual Index size() const = 0;

  // Checks the input length, then forwards to apply_impl().
  Vector apply(const Vector& v) const;

  // Elementary multiplications performed by one apply(). Exact for the
  // sparse/dense operators, a deterministic estimate for FFT-based ones.
  virtual std::uint64_t multiply_count() const;

  // Dense materialization, refused above kMaxDenseSize.
  Matrix to_dense() const;

 protected:
  virtual Vector apply_impl(const Vector& v) const = 0;
  // Default builds the matrix column by column through apply_impl().
  virtual Matrix dense_impl() const;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(Matrix matrix);
  Index size() const override { return matrix_.rows(); }
  std::uint64_t multiply_count() const override;
  const Matrix& matrix() const { return matrix_; }

 protected:
  Vector apply_impl(const Vector& v) const override;
  Matrix dense_impl() const override { return matrix_; }

 private:
  Matrix matrix_;
};

class DiagonalOperator final : public LinearOperator {
 public:
  explicit DiagonalOperator(Vector diagonal);
  Index size() const override { return diagonal_.size(); }
  std::uint64_t multiply_count() const override;
  const Vector& diagonal() const { return diagonal_; }

 protected:
  Vector apply_impl(const Vector& v) const override;
  Matrix dense_impl() const override;

 private:
  Vector diagonal_;
};

// Symmetric Toeplitz matrix A[i][j] = first_column[|i - j|]. Products go
// through a circulant embedding of power-of-two size >= 2m whose spectrum is
// computed once at construction.
class ToeplitzOperator final : public LinearOperator {
 public:
  explicit ToeplitzOperator(Vector first_column);
  Index size() const override { return first_column_.size(); }
  std::uint64_t multiply_count() const override;
  const Vector& first_column() const { return first_column_; }
  Index embedding_size() const { return embedding_size_; }

 protected:
  Vector apply_impl(const Vector& v) const override;
  Matrix dense_impl() const override;

 private:
  Vector first_column_;
  Index embedding_size_;
  std::vector<std::complex<double>> spectrum_;
};

// Free-function form of the Toeplitz product.
Vector toeplitz_mvm(const Vector& first_column, const Vector& v);

// n x m interpolation matrix with exactly four (column, weight) entries per
// row. Rectangular, so it is not a LinearOperator.
class SparseInterpolationMatrix {
 public:
  static constexpr int kStencil = 4;
  using Columns = std::array<Index, kStencil>;
  using Weights = std::array<double, kStencil>;

  SparseInterpolationMatrix(Index n_cols, std::vector<Columns> columns,
                            std::vector<Weights> weights);

  Index rows() const { return static_cast<Index>(columns_.size()); }
  Index cols() const { return n_cols_; }
  const Columns& row_columns(Index i) const { return columns_[i]; }
  const Weights& row_weights(Index i) const { return weights_[i]; }

  // W * v, v of length cols().
  Vector apply(const Vector& v) const;
  // W^T * u, u of length rows().
  Vector apply_transpose(const Vector& u) const;
  std::uint64_t multiply_count() const { return kStencil * columns_.size(); }

  Matrix to_dense() const;

 private:
  Index n_cols_;
  std::vector<Columns> columns_;
  std::vector<Weights> weights_;
};

Vector interp_apply(const SparseInterpolationMatrix& w, const Vector& v);
Vector interp_apply_transpose(const SparseInterpolationMatrix& w,
                              const Vector& u);

// Q T Q^T with Q (n x r) orthonormal and T (r x r) symmetric tridiagonal,
// T stored as its diagonal (alpha) and off-diagonal (beta, length r - 1).
struct LanczosFactor {
  Matrix basis;
  Vector alpha;
  Vector beta;

  Index rows() const { return basis.rows(); }
  Index rank() const { return alpha.size(); }
  Matrix tridiagonal() const;
  Vector apply(const Vector& v) const;
  Matrix reconstruct() const;
};

class LowRankOperator final : public LinearOperator {
 public:
  explicit LowRankOperator(LanczosFactor factor);
  Index size() const override { return factor_.rows(); }
  std::uint64_t multiply_count() const override;
  const LanczosFactor& factor() const { return factor_; }

 protected:
  Vector apply_impl(const Vector& v) const override;

 private:
  LanczosFactor factor_;
};

// base + shift * I.
class ShiftedOperator final : public LinearOperator {
 public:
  ShiftedOperator(OperatorPtr base, double shift);
  Index size() const override { return base_->size(); }
  std::uint64_t multiply_count() const override;
  double shift() const { return shift_; }
  const OperatorPtr& base() const { return base_; }

 protected:
  Vector apply_impl(const Vector& v) const override;

 private:
  OperatorPtr base_;
  double shift_;
};

class SumOperator final : public LinearOperator {
 public:
  explicit SumOperator(std::vector<OperatorPtr> terms);
  Index size() const override { return terms_.front()->size(); }
  std::uint64_t multiply_count() const override;

 protected:
  Vector apply_impl(const Vector& v) const override;

 private:
  std::vector<OperatorPtr> terms_;
};

// Forwards to a wrapped operator and counts apply() calls. Used to check the
// MVM budgets of CG, Lanczos and the product-kernel decomposition.
class CountingOperator final : public LinearOperator {
 public:
  explicit CountingOperator(OperatorPtr inner);
  Index size() const override { return inner_->size(); }
  std::uint64_t multiply_count() const override {
    return inner_->multiply_count();
  }
  std::uint64_t applies() const { return applies_.load(); }
  void reset() const { applies_.store(0); }

 protected:
  Vector apply_impl(const Vector& v) const override;
  Matrix dense_impl() const override { return inner_->to_dense(); }

 private:
  OperatorPtr inner_;
  mutable std::atomic<std::uint64_t> applies_{0};
};

}  // namespace skipgp
