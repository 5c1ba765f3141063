#include "skipgp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace skipgp {

namespace {

constexpr double kSqrt5 = 2.23606797749978969640917366873;

double lengthscale_for(const KernelSpec& spec, Index dim) {
  return spec.lengthscales.size() == 1 ? spec.lengthscales[0]
                                       : spec.lengthscales[dim];
}

// Squared distance with each coordinate divided by its lengthscale.
double scaled_sq_distance(const KernelSpec& spec, std::span<const double> x,
                          std::span<const double> z) {
  if (spec.active_dimension) {
    const auto dim = static_cast<std::size_t>(*spec.active_dimension);
    if (dim >= x.size() || dim >= z.size()) {
      throw DimensionError("kernel_eval: active dimension " +
                           std::to_string(dim) + " outside input");
    }
    const double diff = (x[dim] - z[dim]) / spec.lengthscales[0];
    return diff * diff;
  }
  if (x.size() != z.size()) {
    throw DimensionError("kernel_eval: inputs of different dimension");
  }
  if (spec.is_ard() && static_cast<Index>(x.size()) != spec.lengthscales.size()) {
    throw DimensionError("kernel_eval: input dimension " +
                         std::to_string(x.size()) + " vs " +
                         std::to_string(spec.lengthscales.size()) +
                         " ARD lengthscales");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = (x[i] - z[i]) / lengthscale_for(spec, static_cast<Index>(i));
    total += diff * diff;
  }
  return total;
}

double eval_from_sq(const KernelSpec& spec, double sq) {
  switch (spec.family) {
    case KernelFamily::kRbf:
      return spec.outputscale * std::exp(-0.5 * sq);
    case KernelFamily::kMatern52: {
      const double t = std::sqrt(sq);
      return spec.outputscale * (1.0 + kSqrt5 * t + 5.0 * sq / 3.0) *
             std::exp(-kSqrt5 * t);
    }
  }
  return 0.0;
}

}  // namespace

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::kRbf:
      return "rbf";
    case KernelFamily::kMatern52:
      return "matern52";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "rbf") return KernelFamily::kRbf;
  if (name == "matern52") return KernelFamily::kMatern52;
  throw InvalidArgument("unknown kernel family '" + name + "'");
}

KernelSpec KernelSpec::rbf(Vector lengthscales, double outputscale) {
  KernelSpec spec;
  spec.family = KernelFamily::kRbf;
  spec.lengthscales = std::move(lengthscales);
  spec.outputscale = outputscale;
  spec.validate();
  return spec;
}

KernelSpec KernelSpec::matern52(Vector lengthscales, double outputscale) {
  KernelSpec spec = rbf(std::move(lengthscales), outputscale);
  spec.family = KernelFamily::kMatern52;
  return spec;
}

KernelSpec KernelSpec::component(KernelFamily family, double lengthscale,
                                 double outputscale, Index dimension) {
  KernelSpec spec;
  spec.family = family;
  spec.lengthscales = Vector::Constant(1, lengthscale);
  spec.outputscale = outputscale;
  spec.active_dimension = dimension;
  spec.validate();
  return spec;
}

void KernelSpec::validate() const {
  if (lengthscales.size() == 0) {
    throw InvalidArgument("kernel needs at least one lengthscale");
  }
  for (Index i = 0; i < lengthscales.size(); ++i) {
    if (!(lengthscales[i] > 0.0) || !std::isfinite(lengthscales[i])) {
      throw InvalidArgument("kernel lengthscales must be positive and finite");
    }
  }
  if (!(outputscale > 0.0) || !std::isfinite(outputscale)) {
    throw InvalidArgument("kernel outputscale must be positive and finite");
  }
  if (active_dimension && (*active_dimension < 0 || is_ard())) {
    throw InvalidArgument(
        "a 1-D component needs a nonnegative dimension and a single lengthscale");
  }
}

double KernelSpec::eval_scaled_distance(double scaled_distance) const {
  return eval_from_sq(*this, scaled_distance * scaled_distance);
}

double KernelSpec::eval_1d(double x, double z) const {
  return eval_scaled_distance((x - z) / lengthscales[0]);
}

double kernel_eval(const KernelSpec& spec, std::span<const double> x,
                   std::span<const double> z) {
  return eval_from_sq(spec, scaled_sq_distance(spec, x, z));
}

void ProductKernelSpec::validate() const {
  if (components.empty()) {
    throw InvalidArgument("product kernel needs at least one component");
  }
  std::set<Index> seen;
  for (const auto& c : components) {
    c.validate();
    if (!c.active_dimension) {
      throw InvalidArgument("product kernel components must be 1-D");
    }
    if (!seen.insert(*c.active_dimension).second) {
      throw InvalidArgument("product kernel component dimensions overlap");
    }
  }
}

double ProductKernelSpec::outputscale() const {
  double total = 1.0;
  for (const auto& c : components) total *= c.outputscale;
  return total;
}

double kernel_eval(const ProductKernelSpec& spec, std::span<const double> x,
                   std::span<const double> z) {
  double total = 1.0;
  for (const auto& c : spec.components) total *= kernel_eval(c, x, z);
  return total;
}

ProductKernelSpec decompose_product(const KernelSpec& spec, Index input_dim) {
  spec.validate();
  if (input_dim < 1) throw InvalidArgument("decompose_product: input_dim < 1");
  if (spec.is_ard() && spec.lengthscales.size() != input_dim) {
    throw DimensionError("decompose_product: ARD lengthscale count differs "
                         "from input dimension");
  }
  if (spec.family != KernelFamily::kRbf && input_dim > 1) {
    throw UnsupportedDecomposition(
        "Matern 5/2 over more than one dimension is not a product of 1-D "
        "kernels");
  }
  ProductKernelSpec product;
  for (Index i = 0; i < input_dim; ++i) {
    const Index dim = spec.active_dimension.value_or(i);
    product.components.push_back(KernelSpec::component(
        spec.family, lengthscale_for(spec, i), i == 0 ? spec.outputscale : 1.0,
        dim));
  }
  return product;
}

namespace {

template <typename Spec>
Matrix build_kernel_matrix(const Spec& spec, const Matrix& x, const Matrix& z) {
  if (x.cols() != z.cols()) {
    throw DimensionError("kernel_matrix: X and Z have different column counts");
  }
  // Row-major copies give contiguous spans per point.
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMajor xr = x;
  const RowMajor zr = z;
  const auto d = static_cast<std::size_t>(x.cols());
  Matrix out(x.rows(), z.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    const std::span<const double> xi(xr.row(i).data(), d);
    for (Index j = 0; j < z.rows(); ++j) {
      out(i, j) = kernel_eval(spec, xi, std::span<const double>(zr.row(j).data(), d));
    }
  }
  return out;
}

}  // namespace

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& x, const Matrix& z) {
  return build_kernel_matrix(spec, x, z);
}

Matrix kernel_matrix(const ProductKernelSpec& spec, const Matrix& x,
                     const Matrix& z) {
  return build_kernel_matrix(spec, x, z);
}

}  // namespace skipgp
