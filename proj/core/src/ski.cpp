#include "skipgp/ski.hpp"

#include <algorithm>
#include <cmath>

namespace skipgp {

namespace {

constexpr double kKeysA = -0.5;

// Slack, in cells, when testing whether a point is interpolable.
constexpr double kEdgeSlack = 1e-9;

Vector kuu_generator(const KernelSpec& component, const Grid1D& grid) {
  component.validate();
  Vector column(grid.m);
  const double h = grid.spacing();
  for (Index j = 0; j < grid.m; ++j) {
    column[j] = component.eval_scaled_distance(static_cast<double>(j) * h /
                                               component.lengthscales[0]);
  }
  return column;
}

}  // namespace

bool Grid1D::interpolable(double x) const {
  const double h = spacing();
  return x >= node(1) - kEdgeSlack * h && x <= node(m - 2) + kEdgeSlack * h;
}

Grid1D build_grid(std::span<const double> values, Index m) {
  if (values.empty()) throw InvalidArgument("build_grid: no values");
  if (m < 4) throw InvalidArgument("build_grid: m must be >= 4");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    throw InvalidArgument("build_grid: non-finite value");
  }
  Grid1D grid;
  grid.m = m;
  if (hi == lo) {
    grid.lower = lo - 0.5;
    grid.upper = lo + 0.5;
    return grid;
  }
  const Index pad = m >= 6 ? 2 : 1;
  const double h = (hi - lo) / static_cast<double>(m - 1 - 2 * pad);
  grid.lower = lo - static_cast<double>(pad) * h;
  grid.upper = grid.lower + static_cast<double>(m - 1) * h;
  return grid;
}

double keys_cubic_weight(double distance) {
  const double s = std::abs(distance);
  if (s <= 1.0) return ((kKeysA + 2.0) * s - (kKeysA + 3.0)) * s * s + 1.0;
  if (s < 2.0) return ((kKeysA * s - 5.0 * kKeysA) * s + 8.0 * kKeysA) * s - 4.0 * kKeysA;
  return 0.0;
}

SparseInterpolationMatrix interpolation_weights(std::span<const double> points,
                                                const Grid1D& grid) {
  if (grid.m < 4 || !(grid.upper > grid.lower)) {
    throw InvalidArgument("interpolation_weights: invalid grid");
  }
  const double h = grid.spacing();
  std::vector<SparseInterpolationMatrix::Columns> columns(points.size());
  std::vector<SparseInterpolationMatrix::Weights> weights(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double x = points[i];
    if (!grid.interpolable(x)) {
      throw OutOfRangeError("point " + std::to_string(x) +
                                " lies outside the interpolable grid interior",
                            static_cast<Index>(i));
    }
    const double s = (x - grid.lower) / h;
    const Index j = std::clamp<Index>(static_cast<Index>(std::floor(s)), 1, grid.m - 3);
    const double t = s - static_cast<double>(j);
    columns[i] = {j - 1, j, j + 1, j + 2};
    weights[i] = {keys_cubic_weight(1.0 + t), keys_cubic_weight(t),
                  keys_cubic_weight(1.0 - t), keys_cubic_weight(2.0 - t)};
  }
  return SparseInterpolationMatrix(grid.m, std::move(columns), std::move(weights));
}

SkiOperator::SkiOperator(KernelSpec component, std::span<const double> points,
                         const Grid1D& grid)
    : component_(std::move(component)),
      ski_{grid, interpolation_weights(points, grid),
           ToeplitzOperator(kuu_generator(component_, grid))} {
  component_.validate();
  if (component_.is_ard()) {
    throw InvalidArgument("SKI needs a one-dimensional component kernel");
  }
  if (points.empty()) throw InvalidArgument("SKI operator over zero points");
}

std::uint64_t SkiOperator::multiply_count() const {
  return 2 * ski_.weights.multiply_count() + ski_.kuu.multiply_count();
}

Vector SkiOperator::apply_impl(const Vector& v) const {
  return ski_.weights.apply(ski_.kuu.apply(ski_.weights.apply_transpose(v)));
}

Vector SkiOperator::grid_row(double x) const {
  const std::array<double, 1> point{x};
  const SparseInterpolationMatrix w = interpolation_weights(point, ski_.grid);
  const auto& cols = w.row_columns(0);
  const auto& wts = w.row_weights(0);
  const Vector& generator = ski_.kuu.first_column();
  Vector row = Vector::Zero(ski_.grid.m);
  for (Index k = 0; k < ski_.grid.m; ++k) {
    double s = 0.0;
    for (int l = 0; l < SparseInterpolationMatrix::kStencil; ++l) {
      s += wts[l] * generator[std::abs(k - cols[l])];
    }
    row[k] = s;
  }
  return row;
}

Vector SkiOperator::cross_covariance(double x) const {
  return ski_.weights.apply(grid_row(x));
}

double SkiOperator::self_covariance(double x) const {
  const std::array<double, 1> point{x};
  const SparseInterpolationMatrix w = interpolation_weights(point, ski_.grid);
  return w.apply(grid_row(x))[0];
}

std::shared_ptr<const SkiOperator> ski_operator(const KernelSpec& component,
                                                std::span<const double> points,
                                                Index m) {
  return std::make_shared<const SkiOperator>(component, points,
                                             build_grid(points, m));
}

}  // namespace skipgp
