#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cbvf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/**
 * Rectangular node-centred grid over a box in state space.
 *
 * Non-periodic axes carry nodes at both endpoints. Periodic axes exclude the
 * node at `hi`, which is identified with `lo`. Flat node indices are
 * row-major: the last axis varies fastest.
 */
class Grid {
 public:
  static constexpr std::size_t kMaxDim = 6;

  Grid(std::vector<double> lo, std::vector<double> hi, std::vector<std::size_t> counts,
       std::vector<bool> periodic, std::vector<std::string> axis_names = {});

  std::size_t dim() const { return lo_.size(); }
  std::size_t size() const { return size_; }

  const std::vector<double>& lo() const { return lo_; }
  const std::vector<double>& hi() const { return hi_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  const std::vector<bool>& periodic() const { return periodic_; }
  const std::vector<std::string>& axis_names() const { return axis_names_; }

  double spacing(std::size_t axis) const { return spacing_[axis]; }
  std::size_t count(std::size_t axis) const { return counts_[axis]; }
  bool is_periodic(std::size_t axis) const { return periodic_[axis]; }
  std::size_t stride(std::size_t axis) const { return strides_[axis]; }
  double period(std::size_t axis) const { return hi_[axis] - lo_[axis]; }

  /// Coordinate of node `index` along `axis`.
  double coordinate(std::size_t axis, std::size_t index) const {
    return lo_[axis] + static_cast<double>(index) * spacing_[axis];
  }

  Vec node(std::size_t flat) const;
  void unravel(std::size_t flat, std::span<std::size_t> index) const;
  std::size_t ravel(std::span<const std::size_t> index) const;

  /// Flat index of the neighbour `offset` steps along `axis`, or `npos` when
  /// it falls off a non-periodic edge.
  std::size_t neighbor(std::size_t flat, std::size_t axis, int offset) const;

  /// Smallest node-to-node distance over all axes.
  double min_spacing() const;

  /// Bytes needed to hold one double per node.
  std::size_t field_bytes() const { return size_ * sizeof(double); }

  bool same_layout(const Grid& other, double rel_tol = 1e-12) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::vector<double> lo_;
  std::vector<double> hi_;
  std::vector<std::size_t> counts_;
  std::vector<bool> periodic_;
  std::vector<std::string> axis_names_;
  std::vector<double> spacing_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

/// Per-axis enclosing cell of a query point.
struct CellLocation {
  std::array<std::size_t, Grid::kMaxDim> lower{};
  std::array<std::size_t, Grid::kMaxDim> upper{};
  std::array<double, Grid::kMaxDim> fraction{};
};

/// Locates `x` in the grid, wrapping periodic axes. Throws OutOfDomainError
/// naming the first non-periodic axis on which `x` lies outside [lo, hi].
CellLocation locate(const Grid& grid, const Vec& x);

/// Scalar samples on every grid node at a DP pseudo-time (t <= 0).
struct ValueField {
  ValueField(Grid grid, std::vector<double> values, double time = 0.0);

  Grid grid;
  std::vector<double> values;
  double time = 0.0;

  double min() const;
  double max() const;
};

using StateFunction = std::function<double(const Vec&)>;

ValueField sample(const Grid& grid, const StateFunction& fn);

/// Multilinear interpolation over the 2^dim corners of the enclosing cell.
double interpolate(const ValueField& field, const Vec& x);

/// Central-difference node gradients, multilinearly interpolated to `x`.
Vec gradient_at(const ValueField& field, const Vec& x);

/// Central difference at a single node along one axis. Non-periodic edges use
/// a linearly extrapolated ghost node, which reduces to a one-sided difference.
double central_difference(const ValueField& field, std::size_t flat, std::size_t axis);

/// One-sided first-order differences; entry [node * dim + axis].
struct UpwindGradients {
  std::vector<double> left;
  std::vector<double> right;
};

UpwindGradients upwind_gradients(const ValueField& field);

/// Ghost rule on non-periodic edges: linear extrapolation makes the one-sided
/// difference count on both sides; constant extrapolation makes the outward
/// difference zero.
enum class Boundary { Linear, Constant };

/// Left and right differences at one node along one axis.
std::pair<double, double> upwind_difference(const Grid& grid, std::span<const double> values,
                                            std::size_t flat, std::size_t axis,
                                            Boundary boundary = Boundary::Linear);

}  // namespace cbvf
