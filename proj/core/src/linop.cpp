#include "skipgp/linop.hpp"

#include <bit>
#include <cmath>
#include <string>

#include <unsupported/Eigen/FFT>

namespace skipgp {

Vector LinearOperator::apply(const Vector& v) const {
  require_size(v.size(), size(), "LinearOperator::apply");
  return apply_impl(v);
}

std::uint64_t LinearOperator::multiply_count() const {
  const auto n = static_cast<std::uint64_t>(size());
  return n * n;
}

Matrix LinearOperator::to_dense() const {
  if (size() > kMaxDenseSize) {
    throw InvalidArgument("refusing to materialize an operator of size " +
                          std::to_string(size()));
  }
  return dense_impl();
}

Matrix LinearOperator::dense_impl() const {
  const Index n = size();
  Matrix out(n, n);
  Vector e = Vector::Zero(n);
  for (Index j = 0; j < n; ++j) {
    e[j] = 1.0;
    out.col(j) = apply_impl(e);
    e[j] = 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------

DenseOperator::DenseOperator(Matrix matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() == 0) {
    throw DimensionError("DenseOperator needs a non-empty square matrix");
  }
}

std::uint64_t DenseOperator::multiply_count() const {
  const auto n = static_cast<std::uint64_t>(matrix_.rows());
  return n * n;
}

Vector DenseOperator::apply_impl(const Vector& v) const { return matrix_ * v; }

DiagonalOperator::DiagonalOperator(Vector diagonal)
    : diagonal_(std::move(diagonal)) {
  if (diagonal_.size() == 0) {
    throw DimensionError("DiagonalOperator needs a non-empty diagonal");
  }
}

std::uint64_t DiagonalOperator::multiply_count() const {
  return static_cast<std::uint64_t>(diagonal_.size());
}

Vector DiagonalOperator::apply_impl(const Vector& v) const {
  return diagonal_.cwiseProduct(v);
}

Matrix DiagonalOperator::dense_impl() const { return diagonal_.asDiagonal(); }

// ---------------------------------------------------------------------------

namespace {

Index circulant_size(Index m) {
  return static_cast<Index>(std::bit_ceil(static_cast<std::uint64_t>(2 * m)));
}

std::vector<std::complex<double>> circulant_spectrum(const Vector& column,
                                                     Index size) {
  const Index m = column.size();
  std::vector<double> generator(static_cast<std::size_t>(size), 0.0);
  for (Index k = 0; k < m; ++k) generator[k] = column[k];
  for (Index k = 1; k < m; ++k) generator[size - k] = column[k];
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, generator);
  return spectrum;
}

Vector circulant_product(const std::vector<std::complex<double>>& spectrum,
                         const Vector& v) {
  const auto size = spectrum.size();
  std::vector<double> padded(size, 0.0);
  for (Index i = 0; i < v.size(); ++i) padded[i] = v[i];
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, padded);
  for (std::size_t k = 0; k < size; ++k) freq[k] *= spectrum[k];
  std::vector<double> result;
  fft.inv(result, freq);
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) out[i] = result[i];
  return out;
}

}  // namespace

ToeplitzOperator::ToeplitzOperator(Vector first_column)
    : first_column_(std::move(first_column)) {
  if (first_column_.size() == 0) {
    throw DimensionError("ToeplitzOperator needs m >= 1");
  }
  embedding_size_ = circulant_size(first_column_.size());
  spectrum_ = circulant_spectrum(first_column_, embedding_size_);
}

std::uint64_t ToeplitzOperator::multiply_count() const {
  // Two length-N transforms at ~2 N log2 N real multiplies each, plus the
  // N complex pointwise products.
  const auto n = static_cast<std::uint64_t>(embedding_size_);
  const auto log_n = static_cast<std::uint64_t>(std::bit_width(n) - 1);
  return 4 * n * log_n + 4 * n;
}

Vector ToeplitzOperator::apply_impl(const Vector& v) const {
  return circulant_product(spectrum_, v);
}

Matrix ToeplitzOperator::dense_impl() const {
  const Index m = first_column_.size();
  Matrix out(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) out(i, j) = first_column_[std::abs(i - j)];
  }
  return out;
}

Vector toeplitz_mvm(const Vector& first_column, const Vector& v) {
  require_size(v.size(), first_column.size(), "toeplitz_mvm");
  if (first_column.size() == 0) throw DimensionError("toeplitz_mvm: m == 0");
  return circulant_product(
      circulant_spectrum(first_column, circulant_size(first_column.size())), v);
}

// ---------------------------------------------------------------------------

SparseInterpolationMatrix::SparseInterpolationMatrix(
    Index n_cols, std::vector<Columns> columns, std::vector<Weights> weights)
    : n_cols_(n_cols), columns_(std::move(columns)), weights_(std::move(weights)) {
  if (columns_.size() != weights_.size()) {
    throw DimensionError("interpolation columns/weights row count mismatch");
  }
  if (n_cols_ <= 0) throw DimensionError("interpolation matrix needs m >= 1");
  for (const auto& row : columns_) {
    for (Index c : row) {
      if (c < 0 || c >= n_cols_) {
        throw DimensionError("interpolation column index " + std::to_string(c) +
                             " outside [0, " + std::to_string(n_cols_) + ")");
      }
    }
  }
}

Vector SparseInterpolationMatrix::apply(const Vector& v) const {
  require_size(v.size(), n_cols_, "interp_apply");
  Vector out(rows());
  for (Index i = 0; i < rows(); ++i) {
    const auto& c = columns_[i];
    const auto& w = weights_[i];
    out[i] = w[0] * v[c[0]] + w[1] * v[c[1]] + w[2] * v[c[2]] + w[3] * v[c[3]];
  }
  return out;
}

Vector SparseInterpolationMatrix::apply_transpose(const Vector& u) const {
  require_size(u.size(), rows(), "interp_apply_transpose");
  Vector out = Vector::Zero(n_cols_);
  for (Index i = 0; i < rows(); ++i) {
    const auto& c = columns_[i];
    const auto& w = weights_[i];
    for (int k = 0; k < kStencil; ++k) out[c[k]] += w[k] * u[i];
  }
  return out;
}

Matrix SparseInterpolationMatrix::to_dense() const {
  if (rows() > kMaxDenseSize || n_cols_ > kMaxDenseSize) {
    throw InvalidArgument("refusing to materialize a large interpolation matrix");
  }
  Matrix out = Matrix::Zero(rows(), n_cols_);
  for (Index i = 0; i < rows(); ++i) {
    for (int k = 0; k < kStencil; ++k) out(i, columns_[i][k]) += weights_[i][k];
  }
  return out;
}

Vector interp_apply(const SparseInterpolationMatrix& w, const Vector& v) {
  return w.apply(v);
}

Vector interp_apply_transpose(const SparseInterpolationMatrix& w,
                              const Vector& u) {
  return w.apply_transpose(u);
}

// ---------------------------------------------------------------------------

Matrix LanczosFactor::tridiagonal() const {
  const Index r = rank();
  Matrix t = Matrix::Zero(r, r);
  for (Index i = 0; i < r; ++i) t(i, i) = alpha[i];
  for (Index i = 0; i + 1 < r; ++i) {
    t(i, i + 1) = beta[i];
    t(i + 1, i) = beta[i];
  }
  return t;
}

Vector LanczosFactor::apply(const Vector& v) const {
  require_size(v.size(), rows(), "LanczosFactor::apply");
  const Vector c = basis.transpose() * v;
  const Index r = rank();
  Vector tc(r);
  for (Index i = 0; i < r; ++i) {
    double s = alpha[i] * c[i];
    if (i > 0) s += beta[i - 1] * c[i - 1];
    if (i + 1 < r) s += beta[i] * c[i + 1];
    tc[i] = s;
  }
  return basis * tc;
}

Matrix LanczosFactor::reconstruct() const {
  return basis * tridiagonal() * basis.transpose();
}

LowRankOperator::LowRankOperator(LanczosFactor factor)
    : factor_(std::move(factor)) {
  if (factor_.rank() == 0) throw DimensionError("low-rank factor of rank 0");
}

std::uint64_t LowRankOperator::multiply_count() const {
  const auto n = static_cast<std::uint64_t>(factor_.rows());
  const auto r = static_cast<std::uint64_t>(factor_.rank());
  return 2 * n * r + 3 * r;
}

Vector LowRankOperator::apply_impl(const Vector& v) const {
  return factor_.apply(v);
}

ShiftedOperator::ShiftedOperator(OperatorPtr base, double shift)
    : base_(std::move(base)), shift_(shift) {
  if (!base_) throw InvalidArgument("ShiftedOperator: null base operator");
}

std::uint64_t ShiftedOperator::multiply_count() const {
  return base_->multiply_count() + static_cast<std::uint64_t>(size());
}

Vector ShiftedOperator::apply_impl(const Vector& v) const {
  Vector out = base_->apply(v);
  out += shift_ * v;
  return out;
}

SumOperator::SumOperator(std::vector<OperatorPtr> terms)
    : terms_(std::move(terms)) {
  if (terms_.empty()) throw InvalidArgument("SumOperator needs >= 1 term");
  for (const auto& t : terms_) {
    if (!t) throw InvalidArgument("SumOperator: null term");
    require_size(t->size(), terms_.front()->size(), "SumOperator term");
  }
}

std::uint64_t SumOperator::multiply_count() const {
  std::uint64_t total = 0;
  for (const auto& t : terms_) total += t->multiply_count();
  return total;
}

Vector SumOperator::apply_impl(const Vector& v) const {
  Vector out = terms_.front()->apply(v);
  for (std::size_t k = 1; k < terms_.size(); ++k) out += terms_[k]->apply(v);
  return out;
}

CountingOperator::CountingOperator(OperatorPtr inner) : inner_(std::move(inner)) {
  if (!inner_) throw InvalidArgument("CountingOperator: null operator");
}

Vector CountingOperator::apply_impl(const Vector& v) const {
  applies_.fetch_add(1);
  return inner_->apply(v);
}

}  // namespace skipgp
