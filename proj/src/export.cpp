#include "cbvf/export.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include "cbvf/errors.hpp"

namespace cbvf {

SliceSpec parse_slice(std::string_view text, const Grid& grid) {
  const std::size_t n = grid.dim();
  std::vector<std::string> items;
  if (text.empty()) {
    if (n != 2) throw ConfigError("a slice spec is required for " + std::to_string(n) + "-D fields");
    items = {":", ":"};
  } else {
    std::string item;
    std::istringstream in{std::string(text)};
    while (std::getline(in, item, ',')) items.push_back(item);
    if (text.back() == ',') items.emplace_back();
  }
  if (items.size() != n) {
    throw ConfigError("slice spec '" + std::string(text) + "' has " + std::to_string(items.size()) +
                      " entries for a " + std::to_string(n) + "-D field");
  }
  SliceSpec slice;
  slice.fixed.resize(n);
  std::vector<std::size_t> free_axes;
  for (std::size_t k = 0; k < n; ++k) {
    std::string s = items[k];
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
    if (s == ":") {
      free_axes.push_back(k);
      continue;
    }
    std::size_t index = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), index);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError("slice entry '" + s + "' for axis " + std::to_string(k) +
                        " is neither ':' nor a node index");
    }
    if (index >= grid.count(k)) {
      throw ConfigError("slice index " + s + " out of range for axis " + std::to_string(k) +
                        " with " + std::to_string(grid.count(k)) + " nodes");
    }
    slice.fixed[k] = index;
  }
  if (free_axes.size() != 2) {
    throw ConfigError("slice spec must leave exactly two axes free (':'), got " +
                      std::to_string(free_axes.size()));
  }
  slice.row_axis = free_axes[0];
  slice.col_axis = free_axes[1];
  return slice;
}

namespace {

std::size_t flat_index(const Grid& grid, const SliceSpec& slice, std::size_t r, std::size_t c) {
  std::vector<std::size_t> idx(grid.dim());
  for (std::size_t k = 0; k < grid.dim(); ++k) idx[k] = slice.fixed[k].value_or(0);
  idx[slice.row_axis] = r;
  idx[slice.col_axis] = c;
  return grid.ravel(idx);
}

}  // namespace

std::vector<std::vector<double>> slice_values(const ValueField& field, const SliceSpec& slice) {
  const Grid& g = field.grid;
  const std::size_t rows = g.count(slice.row_axis);
  const std::size_t cols = g.count(slice.col_axis);
  std::vector<std::vector<double>> out(rows, std::vector<double>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r][c] = field.values[flat_index(g, slice, r, c)];
  }
  return out;
}

void write_slice_csv(const std::filesystem::path& path, const ValueField& field,
                     const SliceSpec& slice) {
  const Grid& g = field.grid;
  const auto values = slice_values(field, slice);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << g.axis_names()[slice.row_axis] << '\\' << g.axis_names()[slice.col_axis];
  for (std::size_t c = 0; c < g.count(slice.col_axis); ++c) out << ',' << g.coordinate(slice.col_axis, c);
  out << '\n';
  for (std::size_t r = 0; r < values.size(); ++r) {
    out << g.coordinate(slice.row_axis, r);
    for (double v : values[r]) out << ',' << v;
    out << '\n';
  }
}

std::vector<ContourSegment> zero_contour(const ValueField& field, const SliceSpec& slice) {
  const Grid& g = field.grid;
  const auto values = slice_values(field, slice);
  const std::size_t ra = slice.row_axis;
  const std::size_t ca = slice.col_axis;
  const std::size_t rows = g.count(ra);
  const std::size_t cols = g.count(ca);
  const std::size_t row_cells = g.is_periodic(ra) ? rows : rows - 1;
  const std::size_t col_cells = g.is_periodic(ca) ? cols : cols - 1;
  // Coordinates of node k; k == count is the wrapped copy of node 0.
  const auto coord = [&](std::size_t axis, std::size_t k) {
    return g.lo()[axis] + static_cast<double>(k) * g.spacing(axis);
  };

  std::vector<ContourSegment> segments;
  for (std::size_t r = 0; r < row_cells; ++r) {
    const std::size_t r1 = (r + 1) % rows;
    for (std::size_t c = 0; c < col_cells; ++c) {
      const std::size_t c1 = (c + 1) % cols;
      // Corners counter-clockwise: (r,c), (r+1,c), (r+1,c+1), (r,c+1).
      const std::array<double, 4> v{values[r][c], values[r1][c], values[r1][c1], values[r][c1]};
      const std::array<Point2, 4> p{Point2{coord(ra, r), coord(ca, c)},
                                    Point2{coord(ra, r + 1), coord(ca, c)},
                                    Point2{coord(ra, r + 1), coord(ca, c + 1)},
                                    Point2{coord(ra, r), coord(ca, c + 1)}};
      std::array<bool, 4> inside{};
      int inside_count = 0;
      for (int k = 0; k < 4; ++k) {
        inside[k] = v[k] >= 0.0;
        inside_count += inside[k];
      }
      if (inside_count == 0 || inside_count == 4) continue;
      // Edge k joins corner k and corner k+1.
      std::array<std::optional<Point2>, 4> cross;
      for (int k = 0; k < 4; ++k) {
        const int j = (k + 1) % 4;
        if (inside[k] == inside[j]) continue;
        const double t = v[k] / (v[k] - v[j]);
        cross[k] = Point2{p[k][0] + t * (p[j][0] - p[k][0]), p[k][1] + t * (p[j][1] - p[k][1])};
      }
      if (inside_count == 2 && inside[0] == inside[2]) {
        const bool centre_inside = 0.25 * (v[0] + v[1] + v[2] + v[3]) >= 0.0;
        // Cut off the two corners whose class differs from the centre; corner
        // k sits between edges k-1 and k.
        for (int k = 0; k < 4; ++k) {
          if (inside[k] == centre_inside) continue;
          segments.push_back({*cross[(k + 3) % 4], *cross[k]});
        }
        continue;
      }
      std::vector<Point2> ends;
      for (const auto& x : cross) {
        if (x) ends.push_back(*x);
      }
      segments.push_back({ends[0], ends[1]});
    }
  }
  return segments;
}

nlohmann::json contour_json(const ValueField& field, const SliceSpec& slice) {
  const Grid& g = field.grid;
  nlohmann::json fixed = nlohmann::json::object();
  for (std::size_t k = 0; k < g.dim(); ++k) {
    if (slice.fixed[k]) {
      fixed[g.axis_names()[k]] = {{"index", *slice.fixed[k]},
                                  {"coordinate", g.coordinate(k, *slice.fixed[k])}};
    }
  }
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : zero_contour(field, slice)) {
    segs.push_back({{s.a[0], s.a[1]}, {s.b[0], s.b[1]}});
  }
  return {{"axes", {g.axis_names()[slice.row_axis], g.axis_names()[slice.col_axis]}},
          {"fixed", fixed},
          {"time", field.time},
          {"level", 0.0},
          {"segments", segs}};
}

}  // namespace cbvf
