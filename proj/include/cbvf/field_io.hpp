#pragma once

#include <filesystem>

#include "cbvf/grid.hpp"

namespace cbvf {

/// Writes `dir/meta.json` and `dir/values.f64` (little-endian IEEE-754,
/// row-major). Creates `dir` if needed.
void write_field(const std::filesystem::path& dir, const ValueField& field);

/// Reads a field written by `write_field`; the round trip is bit-exact.
ValueField read_field(const std::filesystem::path& dir);

}  // namespace cbvf
