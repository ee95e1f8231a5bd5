#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cbvf/grid.hpp"

namespace cbvf {

/// Two free axes plus a node index for every other axis.
struct SliceSpec {
  std::size_t row_axis = 0;
  std::size_t col_axis = 1;
  std::vector<std::optional<std::size_t>> fixed;  ///< nullopt for the free axes
};

/// Parses ":,:,30" style specs (one entry per axis, exactly two ':'). An empty
/// spec is accepted for 2-D fields.
SliceSpec parse_slice(std::string_view text, const Grid& grid);

/// Values on the slice, [row][col].
std::vector<std::vector<double>> slice_values(const ValueField& field, const SliceSpec& slice);

/// First row holds column-axis coordinates, first column row-axis coordinates.
void write_slice_csv(const std::filesystem::path& path, const ValueField& field,
                     const SliceSpec& slice);

using Point2 = std::array<double, 2>;

struct ContourSegment {
  Point2 a;
  Point2 b;
};

/// Zero-level set of the slice by marching squares. Nodes with value >= 0
/// count as inside; crossings are placed by linear interpolation along cell
/// edges. Saddle cells are resolved by the cell-centre average. Periodic free
/// axes include the wrap-around cells.
std::vector<ContourSegment> zero_contour(const ValueField& field, const SliceSpec& slice);

nlohmann::json contour_json(const ValueField& field, const SliceSpec& slice);

}  // namespace cbvf
