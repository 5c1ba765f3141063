#pragma once

#include <memory>
#include <span>

#include "skipgp/kernels.hpp"
#include "skipgp/linop.hpp"

namespace skipgp {

// Regular grid of m nodes, node j = lower + j * spacing().
struct Grid1D {
  double lower = 0.0;
  double upper = 1.0;
  Index m = 4;

  double spacing() const { return (upper - lower) / static_cast<double>(m - 1); }
  double node(Index j) const { return lower + static_cast<double>(j) * spacing(); }
  // True when x lies in [node(1), node(m - 2)], where all four cubic
  // neighbours exist.
  bool interpolable(double x) const;
};

inline constexpr Index kDefaultGridSize = 100;

// Grid with `m` nodes padded beyond the data range by two cells on each side
// (one cell when m < 6, where two cannot fit). Constant input yields a unit
// span centered on the value.
Grid1D build_grid(std::span<const double> values, Index m);

// Keys cubic convolution kernel with a = -0.5.
double keys_cubic_weight(double distance);

// Four Keys weights per point on its surrounding nodes. Throws
// OutOfRangeError naming the first point outside the interpolable interior.
SparseInterpolationMatrix interpolation_weights(std::span<const double> points,
                                                const Grid1D& grid);

struct SkiApproximation {
  Grid1D grid;
  SparseInterpolationMatrix weights;
  ToeplitzOperator kuu;
};

// W K_UU W^T for one 1-D component kernel. apply() costs O(n + m log m).
class SkiOperator final : public LinearOperator {
 public:
  SkiOperator(KernelSpec component, std::span<const double> points,
              const Grid1D& grid);

  Index size() const override { return ski_.weights.rows(); }
  std::uint64_t multiply_count() const override;

  const SkiApproximation& approximation() const { return ski_; }
  const KernelSpec& component() const { return component_; }

  // Row of the SKI cross-covariance between `x` and the training points,
  // w_x K_UU W^T. Throws OutOfRangeError when x is not interpolable.
  Vector cross_covariance(double x) const;
  // w_x K_UU w_x^T.
  double self_covariance(double x) const;

 protected:
  Vector apply_impl(const Vector& v) const override;

 private:
  Vector grid_row(double x) const;

  KernelSpec component_;
  SkiApproximation ski_;
};

// Builds the grid with build_grid(points, m) and returns the SKI operator.
// The component must be one-dimensional (a single lengthscale).
std::shared_ptr<const SkiOperator> ski_operator(const KernelSpec& component,
                                                std::span<const double> points,
                                                Index m);

}  // namespace skipgp
