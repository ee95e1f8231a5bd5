#include "cbvf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cbvf/errors.hpp"
#include "cbvf/parallel.hpp"

namespace cbvf {

namespace {

// Query coordinates within this many index units of a node snap onto it, so
// interpolation at nodes reproduces stored values exactly.
constexpr double kSnapTolerance = 1e-9;

}  // namespace

Grid::Grid(std::vector<double> lo, std::vector<double> hi, std::vector<std::size_t> counts,
           std::vector<bool> periodic, std::vector<std::string> axis_names)
    : lo_(std::move(lo)),
      hi_(std::move(hi)),
      counts_(std::move(counts)),
      periodic_(std::move(periodic)),
      axis_names_(std::move(axis_names)) {
  const std::size_t d = lo_.size();
  if (d == 0 || d > kMaxDim) {
    throw ConfigError("grid dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  }
  if (hi_.size() != d || counts_.size() != d) {
    throw ConfigError("grid lo, hi and counts must have the same length");
  }
  if (periodic_.empty()) periodic_.assign(d, false);
  if (periodic_.size() != d) throw ConfigError("grid periodic flags must match dimension");
  if (axis_names_.empty()) {
    for (std::size_t k = 0; k < d; ++k) axis_names_.push_back("x" + std::to_string(k));
  }
  if (axis_names_.size() != d) throw ConfigError("grid axis names must match dimension");

  spacing_.resize(d);
  strides_.resize(d);
  size_ = 1;
  for (std::size_t k = 0; k < d; ++k) {
    if (!std::isfinite(lo_[k]) || !std::isfinite(hi_[k]) || !(hi_[k] > lo_[k])) {
      throw ConfigError("grid axis " + std::to_string(k) + " needs finite hi > lo");
    }
    const std::size_t min_count = periodic_[k] ? 3 : 2;
    if (counts_[k] < min_count) {
      throw ConfigError("grid axis " + std::to_string(k) + " needs at least " +
                        std::to_string(min_count) + " nodes");
    }
    const double cells = periodic_[k] ? static_cast<double>(counts_[k])
                                      : static_cast<double>(counts_[k] - 1);
    spacing_[k] = (hi_[k] - lo_[k]) / cells;
    if (size_ > std::numeric_limits<std::size_t>::max() / counts_[k]) {
      throw ConfigError("grid node count overflows");
    }
    size_ *= counts_[k];
  }
  std::size_t stride = 1;
  for (std::size_t k = d; k-- > 0;) {
    strides_[k] = stride;
    stride *= counts_[k];
  }
}

Vec Grid::node(std::size_t flat) const {
  Vec x(static_cast<Eigen::Index>(dim()));
  for (std::size_t k = 0; k < dim(); ++k) {
    x[static_cast<Eigen::Index>(k)] = coordinate(k, (flat / strides_[k]) % counts_[k]);
  }
  return x;
}

void Grid::unravel(std::size_t flat, std::span<std::size_t> index) const {
  for (std::size_t k = 0; k < dim(); ++k) index[k] = (flat / strides_[k]) % counts_[k];
}

std::size_t Grid::ravel(std::span<const std::size_t> index) const {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < dim(); ++k) flat += index[k] * strides_[k];
  return flat;
}

std::size_t Grid::neighbor(std::size_t flat, std::size_t axis, int offset) const {
  const auto n = static_cast<std::ptrdiff_t>(counts_[axis]);
  const auto i = static_cast<std::ptrdiff_t>((flat / strides_[axis]) % counts_[axis]);
  std::ptrdiff_t j = i + offset;
  if (periodic_[axis]) {
    j = ((j % n) + n) % n;
  } else if (j < 0 || j >= n) {
    return npos;
  }
  return flat + static_cast<std::size_t>(j) * strides_[axis] -
         static_cast<std::size_t>(i) * strides_[axis];
}

double Grid::min_spacing() const { return *std::min_element(spacing_.begin(), spacing_.end()); }

bool Grid::same_layout(const Grid& other, double rel_tol) const {
  if (dim() != other.dim() || counts_ != other.counts_ || periodic_ != other.periodic_) {
    return false;
  }
  for (std::size_t k = 0; k < dim(); ++k) {
    const double scale = std::max(1.0, std::abs(hi_[k] - lo_[k]));
    if (std::abs(lo_[k] - other.lo_[k]) > rel_tol * scale ||
        std::abs(hi_[k] - other.hi_[k]) > rel_tol * scale) {
      return false;
    }
  }
  return true;
}

CellLocation locate(const Grid& grid, const Vec& x) {
  if (static_cast<std::size_t>(x.size()) != grid.dim()) {
    throw ConfigError("query dimension " + std::to_string(x.size()) + " does not match grid " +
                      std::to_string(grid.dim()));
  }
  CellLocation loc;
  for (std::size_t k = 0; k < grid.dim(); ++k) {
    const double xk = x[static_cast<Eigen::Index>(k)];
    if (!std::isfinite(xk)) throw OutOfDomainError(k, xk, grid.lo()[k], grid.hi()[k]);
    const auto n = grid.count(k);
    double s = (xk - grid.lo()[k]) / grid.spacing(k);
    if (grid.is_periodic(k)) {
      s = std::fmod(s, static_cast<double>(n));
      if (s < 0.0) s += static_cast<double>(n);
      const double r = std::round(s);
      if (std::abs(s - r) < kSnapTolerance) s = r;
      if (s >= static_cast<double>(n)) s -= static_cast<double>(n);
      const auto i0 = static_cast<std::size_t>(std::floor(s));
      loc.lower[k] = i0;
      loc.upper[k] = (i0 + 1) % n;
      loc.fraction[k] = s - static_cast<double>(i0);
    } else {
      const double top = static_cast<double>(n - 1);
      if (s < -kSnapTolerance || s > top + kSnapTolerance) {
        throw OutOfDomainError(k, xk, grid.lo()[k], grid.hi()[k]);
      }
      const double r = std::round(s);
      if (std::abs(s - r) < kSnapTolerance) s = r;
      s = std::clamp(s, 0.0, top);
      const auto i0 = std::min(static_cast<std::size_t>(std::floor(s)), n - 2);
      loc.lower[k] = i0;
      loc.upper[k] = i0 + 1;
      loc.fraction[k] = s - static_cast<double>(i0);
    }
  }
  return loc;
}

ValueField::ValueField(Grid g, std::vector<double> v, double t)
    : grid(std::move(g)), values(std::move(v)), time(t) {
  if (values.size() != grid.size()) {
    throw ConfigError("value count " + std::to_string(values.size()) +
                      " does not match grid node count " + std::to_string(grid.size()));
  }
  if (time > 0.0) throw ConfigError("value field time must be non-positive");
}

double ValueField::min() const { return *std::min_element(values.begin(), values.end()); }
double ValueField::max() const { return *std::max_element(values.begin(), values.end()); }

ValueField sample(const Grid& grid, const StateFunction& fn) {
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec x = grid.node(i);
    const double v = fn(x);
    if (!std::isfinite(v)) throw NonFiniteError("sampled function is not finite", x);
    values[i] = v;
  }
  return ValueField(grid, std::move(values), 0.0);
}

namespace {

// Visits the 2^dim corners of a located cell with non-zero weight.
template <typename Visit>
void for_each_corner(const Grid& grid, const CellLocation& loc, Visit&& visit) {
  const std::size_t d = grid.dim();
  const std::size_t corners = std::size_t{1} << d;
  for (std::size_t c = 0; c < corners; ++c) {
    double w = 1.0;
    std::size_t flat = 0;
    for (std::size_t k = 0; k < d; ++k) {
      const bool up = (c >> k) & 1U;
      const double f = loc.fraction[k];
      w *= up ? f : 1.0 - f;
      flat += (up ? loc.upper[k] : loc.lower[k]) * grid.stride(k);
    }
    if (w != 0.0) visit(flat, w);
  }
}

}  // namespace

double interpolate(const ValueField& field, const Vec& x) {
  const CellLocation loc = locate(field.grid, x);
  double value = 0.0;
  for_each_corner(field.grid, loc, [&](std::size_t flat, double w) {
    value += w * field.values[flat];
  });
  return value;
}

double central_difference(const ValueField& field, std::size_t flat, std::size_t axis) {
  const auto [left, right] = upwind_difference(field.grid, field.values, flat, axis);
  return 0.5 * (left + right);
}

Vec gradient_at(const ValueField& field, const Vec& x) {
  const CellLocation loc = locate(field.grid, x);
  const std::size_t d = field.grid.dim();
  Vec grad = Vec::Zero(static_cast<Eigen::Index>(d));
  for_each_corner(field.grid, loc, [&](std::size_t flat, double w) {
    for (std::size_t k = 0; k < d; ++k) {
      grad[static_cast<Eigen::Index>(k)] += w * central_difference(field, flat, k);
    }
  });
  return grad;
}

std::pair<double, double> upwind_difference(const Grid& grid, std::span<const double> values,
                                            std::size_t flat, std::size_t axis, Boundary boundary) {
  const double dx = grid.spacing(axis);
  const std::size_t prev = grid.neighbor(flat, axis, -1);
  const std::size_t next = grid.neighbor(flat, axis, +1);
  const double v = values[flat];
  if (prev == Grid::npos) {
    const double right = (values[next] - v) / dx;
    return {boundary == Boundary::Linear ? right : 0.0, right};
  }
  if (next == Grid::npos) {
    const double left = (v - values[prev]) / dx;
    return {left, boundary == Boundary::Linear ? left : 0.0};
  }
  return {(v - values[prev]) / dx, (values[next] - v) / dx};
}

UpwindGradients upwind_gradients(const ValueField& field) {
  const Grid& grid = field.grid;
  const std::size_t d = grid.dim();
  UpwindGradients out;
  out.left.resize(grid.size() * d);
  out.right.resize(grid.size() * d);
  parallel_for(grid.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t k = 0; k < d; ++k) {
        const auto [l, r] = upwind_difference(grid, field.values, i, k);
        out.left[i * d + k] = l;
        out.right[i * d + k] = r;
      }
    }
  });
  return out;
}

}  // namespace cbvf
