#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skipgp/types.hpp"

namespace skipgp {

enum class KernelFamily { kRbf, kMatern52 };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

// A stationary kernel over a point set.
//
// `lengthscales` holds either one shared value or one value per input
// dimension (ARD). When `active_dimension` is set the kernel is a 1-D
// component that only looks at that coordinate of its inputs.
struct KernelSpec {
  KernelFamily family = KernelFamily::kRbf;
  Vector lengthscales = Vector::Ones(1);
  double outputscale = 1.0;
  std::optional<Index> active_dimension;

  static KernelSpec rbf(Vector lengthscales, double outputscale);
  static KernelSpec matern52(Vector lengthscales, double outputscale);
  // 1-D component bound to `dimension`.
  static KernelSpec component(KernelFamily family, double lengthscale,
                              double outputscale, Index dimension);

  bool is_ard() const { return lengthscales.size() > 1; }
  // Throws InvalidArgument on non-positive lengthscales or outputscale.
  void validate() const;

  // Evaluation on a scalar scaled distance; used by SKI, which works with
  // 1-D grids directly.
  double eval_scaled_distance(double scaled_distance) const;
  double eval_1d(double x, double z) const;
};

double kernel_eval(const KernelSpec& spec, std::span<const double> x,
                   std::span<const double> z);

// Product of 1-D components with pairwise distinct active dimensions.
struct ProductKernelSpec {
  std::vector<KernelSpec> components;

  void validate() const;
  double outputscale() const;
};

double kernel_eval(const ProductKernelSpec& spec, std::span<const double> x,
                   std::span<const double> z);

// Splits a d-dimensional RBF (shared or ARD) into d 1-D RBF components. The
// first component carries the full outputscale, the rest 1.0. Matern 5/2 only
// factors for d == 1; otherwise UnsupportedDecomposition.
ProductKernelSpec decompose_product(const KernelSpec& spec, Index input_dim);

// Rows of X and Z are points.
Matrix kernel_matrix(const KernelSpec& spec, const Matrix& x, const Matrix& z);
Matrix kernel_matrix(const ProductKernelSpec& spec, const Matrix& x,
                     const Matrix& z);

}  // namespace skipgp
